#ifndef GCNN_DATASET_HPP
#define GCNN_DATASET_HPP

#include "gcnn/conv.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace gcnn {

/// Images as an N x S matrix (one column per sample, intensities in [0, 1])
/// with labels 0..9. Vertex v of column s is pixel v in row-major order, or
/// the original pixel `kept_indices[v]` after subsampling.
struct Dataset {
    Eigen::MatrixXd images;
    std::vector<std::uint8_t> labels;
    std::vector<std::size_t> kept_indices;  // empty = all pixels

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t vertices() const noexcept { return static_cast<std::size_t>(images.rows()); }

    /// Single-channel batch of the samples listed in `rows`.
    SignalBatch batch(const std::vector<std::size_t>& rows) const;
    std::vector<std::uint8_t> batch_labels(const std::vector<std::size_t>& rows) const;
    /// First `count` samples (or all when count is 0 or larger than size()).
    Dataset head(std::size_t count) const;
};

/// Reads IDX image (magic 2051) and label (magic 2049) files. Pixels are
/// scaled by 1/255. Throws FormatError naming the offending byte offset.
Dataset load_mnist(const std::string& images_path, const std::string& labels_path);

/// Restricts every image to `kept` (ascending pixel ids from subsample_graph).
Dataset subsample_dataset(const Dataset& d, const std::vector<std::size_t>& kept);

// IDX writers, used for fixtures and data conversion.
void write_idx_images(const std::string& path, const std::vector<std::uint8_t>& pixels, std::uint32_t count,
                      std::uint32_t rows, std::uint32_t cols);
void write_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels);

// Binary cache: "GCDS", u32 version, u64 samples, u64 vertices, u64 kept count,
// kept ids (u64), labels (u8), images column-major (f64). Little-endian.
void save_dataset_cache(const std::string& path, const Dataset& d);
Dataset load_dataset_cache(const std::string& path);

/// FNV-1a 64 of a file's bytes, as 16 lowercase hex digits.
std::string file_checksum(const std::string& path);

} // namespace gcnn

#endif // GCNN_DATASET_HPP
