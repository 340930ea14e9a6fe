#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "pianoscribe/numerics/tensor.hpp"

// "PSNN" parameter container:
//   magic "PSNN" | version u32 | header length u32 | header bytes (UTF-8 JSON)
//   | layer count u32 | per layer: tag u32, tensor count u32,
//     per tensor: rank u32, dims u64 x rank, row-major f64 values.
// All integers and floats little-endian.
namespace pianoscribe::nn {

inline constexpr std::uint32_t kContainerVersion = 1;

enum class LayerTag : std::uint32_t {
    dense = 1,
    recurrent = 2,
    conv = 3,
    nade = 4,
    bias_map = 5,
};

struct TensorBlob {
    std::vector<std::uint64_t> shape;
    std::vector<double> values;
};

struct LayerBlob {
    LayerTag tag = LayerTag::dense;
    std::vector<TensorBlob> tensors;
};

struct ModelContainer {
    std::string header;
    std::vector<LayerBlob> layers;
};

TensorBlob to_blob(const Matrix& m);
/// Stores a flattened matrix under an explicit logical shape whose product
/// equals the element count.
TensorBlob to_blob(const Matrix& m, std::vector<std::uint64_t> shape);
/// Reads a blob back into a rows x cols matrix (row-major order).
Matrix from_blob(const TensorBlob& blob, Index rows, Index cols);

void write_container(std::ostream& out, const ModelContainer& model);
ModelContainer read_container(std::istream& in);

void save_container(const std::filesystem::path& path, const ModelContainer& model);
ModelContainer load_container(const std::filesystem::path& path);

} // namespace pianoscribe::nn
