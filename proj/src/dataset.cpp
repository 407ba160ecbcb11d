#include "gcnn/dataset.hpp"

#include "gcnn/binary_io.hpp"
#include "gcnn/errors.hpp"
#include "gcnn/graph.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <stdexcept>

namespace gcnn {
namespace {

constexpr std::uint32_t kImageMagic = 2051;
constexpr std::uint32_t kLabelMagic = 2049;
constexpr std::uint32_t kCacheVersion = 1;

std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open " + path);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

std::uint32_t big_endian_u32(const std::vector<unsigned char>& bytes, std::size_t offset, const std::string& path) {
    if (offset + 4 > bytes.size()) {
        throw FormatError(path + ": truncated header at byte offset " + std::to_string(offset));
    }
    return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
           (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void put_big_endian_u32(std::ostream& os, std::uint32_t v) {
    const std::array<char, 4> b{static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                                static_cast<char>(v)};
    os.write(b.data(), 4);
}

} // namespace

SignalBatch Dataset::batch(const std::vector<std::size_t>& rows) const {
    SignalBatch out(rows.size(), 1, vertices());
    for (std::size_t s = 0; s < rows.size(); ++s) {
        if (rows[s] >= size()) throw std::invalid_argument("Dataset::batch: sample index out of range");
        out.signal(s, 0) = images.col(static_cast<Eigen::Index>(rows[s]));
    }
    return out;
}

std::vector<std::uint8_t> Dataset::batch_labels(const std::vector<std::size_t>& rows) const {
    std::vector<std::uint8_t> out;
    out.reserve(rows.size());
    for (auto r : rows) out.push_back(labels.at(r));
    return out;
}

Dataset Dataset::head(std::size_t count) const {
    if (count == 0 || count >= size()) return *this;
    Dataset out;
    out.images = images.leftCols(static_cast<Eigen::Index>(count));
    out.labels.assign(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(count));
    out.kept_indices = kept_indices;
    return out;
}

Dataset load_mnist(const std::string& images_path, const std::string& labels_path) {
    const auto img = read_file(images_path);
    const auto lab = read_file(labels_path);

    if (const auto magic = big_endian_u32(img, 0, images_path); magic != kImageMagic) {
        throw FormatError(images_path + ": bad magic " + std::to_string(magic) + " at byte offset 0 (expected 2051)");
    }
    if (const auto magic = big_endian_u32(lab, 0, labels_path); magic != kLabelMagic) {
        throw FormatError(labels_path + ": bad magic " + std::to_string(magic) + " at byte offset 0 (expected 2049)");
    }
    const std::size_t count = big_endian_u32(img, 4, images_path);
    const std::size_t rows = big_endian_u32(img, 8, images_path);
    const std::size_t cols = big_endian_u32(img, 12, images_path);
    const std::size_t label_count = big_endian_u32(lab, 4, labels_path);
    if (count != label_count) {
        throw FormatError(labels_path + ": label count " + std::to_string(label_count) + " at byte offset 4 does not match " +
                          std::to_string(count) + " images");
    }
    const std::size_t pixels = rows * cols;
    if (img.size() < 16 + count * pixels) {
        throw FormatError(images_path + ": truncated pixel data at byte offset " + std::to_string(img.size()) +
                          ", expected " + std::to_string(16 + count * pixels) + " bytes");
    }
    if (lab.size() < 8 + count) {
        throw FormatError(labels_path + ": truncated label data at byte offset " + std::to_string(lab.size()) +
                          ", expected " + std::to_string(8 + count) + " bytes");
    }

    Dataset d;
    d.images.resize(static_cast<Eigen::Index>(pixels), static_cast<Eigen::Index>(count));
    d.labels.resize(count);
    for (std::size_t s = 0; s < count; ++s) {
        const unsigned char* src = img.data() + 16 + s * pixels;
        for (std::size_t p = 0; p < pixels; ++p) {
            d.images(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(s)) = src[p] / 255.0;
        }
        const auto label = lab[8 + s];
        if (label > 9) {
            throw FormatError(labels_path + ": label " + std::to_string(label) + " out of range at byte offset " +
                              std::to_string(8 + s));
        }
        d.labels[s] = label;
    }
    return d;
}

Dataset subsample_dataset(const Dataset& d, const std::vector<std::size_t>& kept) {
    Dataset out;
    out.labels = d.labels;
    out.images.resize(static_cast<Eigen::Index>(kept.size()), d.images.cols());
    for (std::size_t v = 0; v < kept.size(); ++v) {
        if (kept[v] >= d.vertices()) {
            throw std::invalid_argument("subsample_dataset: vertex index " + std::to_string(kept[v]) + " out of range");
        }
        out.images.row(static_cast<Eigen::Index>(v)) = d.images.row(static_cast<Eigen::Index>(kept[v]));
    }
    out.kept_indices.reserve(kept.size());
    for (auto k : kept) out.kept_indices.push_back(d.kept_indices.empty() ? k : d.kept_indices[k]);
    return out;
}

void write_idx_images(const std::string& path, const std::vector<std::uint8_t>& pixels, std::uint32_t count,
                      std::uint32_t rows, std::uint32_t cols) {
    if (pixels.size() != std::size_t{count} * rows * cols) {
        throw std::invalid_argument("write_idx_images: pixel count does not match dimensions");
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open " + path + " for writing");
    put_big_endian_u32(os, kImageMagic);
    put_big_endian_u32(os, count);
    put_big_endian_u32(os, rows);
    put_big_endian_u32(os, cols);
    os.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

void write_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open " + path + " for writing");
    put_big_endian_u32(os, kLabelMagic);
    put_big_endian_u32(os, static_cast<std::uint32_t>(labels.size()));
    os.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
}

void save_dataset_cache(const std::string& path, const Dataset& d) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open " + path + " for writing");
    os.write("GCDS", 4);
    io::write_le(os, kCacheVersion);
    io::write_le(os, static_cast<std::uint64_t>(d.size()));
    io::write_le(os, static_cast<std::uint64_t>(d.vertices()));
    io::write_le(os, static_cast<std::uint64_t>(d.kept_indices.size()));
    for (auto k : d.kept_indices) io::write_le(os, static_cast<std::uint64_t>(k));
    os.write(reinterpret_cast<const char*>(d.labels.data()), static_cast<std::streamsize>(d.labels.size()));
    io::write_doubles(os, d.images.data(), static_cast<std::size_t>(d.images.size()));
    if (!os) throw FormatError("failed writing " + path);
}

Dataset load_dataset_cache(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open " + path);
    char magic[4] = {};
    if (!is.read(magic, 4) || std::string(magic, 4) != "GCDS") {
        throw FormatError(path + ": bad dataset cache magic at byte offset 0");
    }
    if (io::read_le<std::uint32_t>(is, path) != kCacheVersion) {
        throw FormatError(path + ": unsupported dataset cache version at byte offset 4");
    }
    const auto samples = io::read_le<std::uint64_t>(is, path);
    const auto vertices = io::read_le<std::uint64_t>(is, path);
    const auto kept = io::read_le<std::uint64_t>(is, path);
    if (kept != 0 && kept != vertices) throw FormatError(path + ": kept index count does not match vertex count");
    Dataset d;
    d.kept_indices.resize(kept);
    for (auto& k : d.kept_indices) k = io::read_le<std::uint64_t>(is, path);
    d.labels.resize(samples);
    if (!is.read(reinterpret_cast<char*>(d.labels.data()), static_cast<std::streamsize>(samples))) {
        throw FormatError(path + ": truncated labels");
    }
    d.images.resize(static_cast<Eigen::Index>(vertices), static_cast<Eigen::Index>(samples));
    io::read_doubles(is, d.images.data(), vertices * samples, path);
    return d;
}

std::string file_checksum(const std::string& path) {
    const auto bytes = read_file(path);
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a(bytes.data(), bytes.size())));
    return hex;
}

} // namespace gcnn
