#include "pianoscribe/acoustic/posteriogram.hpp"

#include <fstream>

#include "pianoscribe/common/errors.hpp"
#include "pianoscribe/common/file_util.hpp"
#include "pianoscribe/features/features.hpp"

namespace pianoscribe::acoustic {

void write_posteriogram(std::ostream& out, const Posteriogram& pg)
{
    features::write_frame_file(out, "PSPG", pg.probs, pg.frame_rate);
}

Posteriogram read_posteriogram(std::istream& in)
{
    Posteriogram pg;
    pg.probs = features::read_frame_file(in, "PSPG", pg.frame_rate);
    if (pg.probs.size() > 0 && (pg.probs.minCoeff() < 0.0 || pg.probs.maxCoeff() > 1.0)) {
        throw FormatError("posteriogram values outside [0, 1]");
    }
    return pg;
}

void save_posteriogram(const std::filesystem::path& path, const Posteriogram& pg)
{
    io::write_file_atomic(path, [&](std::ostream& out) { write_posteriogram(out, pg); });
}

Posteriogram load_posteriogram(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open posteriogram " + path.string());
    }
    return read_posteriogram(in);
}

} // namespace pianoscribe::acoustic
