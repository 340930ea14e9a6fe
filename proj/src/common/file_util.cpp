#include "pianoscribe/common/file_util.hpp"

#include <atomic>
#include <fstream>
#include <iterator>

#include "pianoscribe/common/errors.hpp"

namespace pianoscribe::io {

namespace fs = std::filesystem;

void write_file_atomic(const fs::path& path, const std::function<void(std::ostream&)>& writer)
{
    static std::atomic<unsigned> counter{0};
    fs::path tmp = path;
    tmp += ".tmp" + std::to_string(counter.fetch_add(1));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error("cannot open " + tmp.string() + " for writing");
        }
        writer(out);
        out.flush();
        if (!out) {
            throw Error("write failed: " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw Error("cannot rename into " + path.string() + ": " + ec.message());
    }
}

std::vector<unsigned char> read_file_bytes(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace pianoscribe::io
