#include "pianoscribe/numerics/serialize.hpp"

#include <fstream>
#include <numeric>

#include "pianoscribe/common/binary_io.hpp"
#include "pianoscribe/common/errors.hpp"
#include "pianoscribe/common/file_util.hpp"

namespace pianoscribe::nn {

namespace {

constexpr std::uint32_t kMaxRank = 8;
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 32;

} // namespace

TensorBlob to_blob(const Matrix& m)
{
    return to_blob(m, {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())});
}

TensorBlob to_blob(const Matrix& m, std::vector<std::uint64_t> shape)
{
    const std::uint64_t n = std::accumulate(shape.begin(), shape.end(), std::uint64_t{1}, std::multiplies<>());
    if (n != static_cast<std::uint64_t>(m.size())) {
        throw DimensionError("tensor shape does not match element count");
    }
    TensorBlob blob;
    blob.shape = std::move(shape);
    blob.values.reserve(static_cast<std::size_t>(m.size()));
    for (Index r = 0; r < m.rows(); ++r) {
        for (Index c = 0; c < m.cols(); ++c) {
            blob.values.push_back(m(r, c));
        }
    }
    return blob;
}

Matrix from_blob(const TensorBlob& blob, Index rows, Index cols)
{
    if (blob.values.size() != static_cast<std::size_t>(rows * cols)) {
        throw DimensionError("stored tensor has " + std::to_string(blob.values.size()) + " values, expected " +
                             std::to_string(rows * cols));
    }
    Matrix m(rows, cols);
    std::size_t k = 0;
    for (Index r = 0; r < rows; ++r) {
        for (Index c = 0; c < cols; ++c) {
            m(r, c) = blob.values[k++];
        }
    }
    return m;
}

void write_container(std::ostream& out, const ModelContainer& model)
{
    io::write_magic(out, "PSNN");
    io::write_le<std::uint32_t>(out, kContainerVersion);
    io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.header.size()));
    out.write(model.header.data(), static_cast<std::streamsize>(model.header.size()));
    io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.layers.size()));
    for (const LayerBlob& layer : model.layers) {
        io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(layer.tag));
        io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(layer.tensors.size()));
        for (const TensorBlob& t : layer.tensors) {
            io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
            for (std::uint64_t d : t.shape) {
                io::write_le<std::uint64_t>(out, d);
            }
            for (double v : t.values) {
                io::write_le<double>(out, v);
            }
        }
    }
}

ModelContainer read_container(std::istream& in)
{
    io::expect_magic(in, "PSNN");
    const auto version = io::read_le<std::uint32_t>(in);
    if (version != kContainerVersion) {
        throw FormatError("unsupported PSNN version " + std::to_string(version));
    }
    ModelContainer model;
    const auto header_len = io::read_le<std::uint32_t>(in);
    model.header.resize(header_len);
    in.read(model.header.data(), header_len);
    if (!in) {
        throw FormatError("truncated PSNN header");
    }
    const auto layer_count = io::read_le<std::uint32_t>(in);
    for (std::uint32_t l = 0; l < layer_count; ++l) {
        LayerBlob layer;
        layer.tag = static_cast<LayerTag>(io::read_le<std::uint32_t>(in));
        const auto tensor_count = io::read_le<std::uint32_t>(in);
        for (std::uint32_t k = 0; k < tensor_count; ++k) {
            TensorBlob t;
            const auto rank = io::read_le<std::uint32_t>(in);
            if (rank > kMaxRank) {
                throw FormatError("tensor rank " + std::to_string(rank) + " out of range in layer " +
                                  std::to_string(l));
            }
            std::uint64_t n = 1;
            for (std::uint32_t d = 0; d < rank; ++d) {
                t.shape.push_back(io::read_le<std::uint64_t>(in));
                n *= t.shape.back();
                if (n > kMaxElements) {
                    throw FormatError("tensor too large in layer " + std::to_string(l));
                }
            }
            t.values.resize(static_cast<std::size_t>(n));
            for (double& v : t.values) {
                v = io::read_le<double>(in);
            }
            layer.tensors.push_back(std::move(t));
        }
        model.layers.push_back(std::move(layer));
    }
    return model;
}

void save_container(const std::filesystem::path& path, const ModelContainer& model)
{
    io::write_file_atomic(path, [&](std::ostream& out) { write_container(out, model); });
}

ModelContainer load_container(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open model file " + path.string());
    }
    return read_container(in);
}

} // namespace pianoscribe::nn
