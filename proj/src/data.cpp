#include "mntk/data.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <vector>

#include "mntk/errors.hpp"

namespace mntk {
namespace {

constexpr int kMaxRetries = 1000;

bool parallel_to_any(const Eigen::MatrixXd& rows, Eigen::Index count,
                     const Eigen::RowVectorXd& candidate) {
  for (Eigen::Index j = 0; j < count; ++j) {
    if (std::abs(rows.row(j).dot(candidate)) >= kParallelThreshold) return true;
  }
  return false;
}

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string(), 0);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset,
                        const std::string& what) {
  if (offset + 4 > bytes.size()) throw FormatError(what + ": truncated header", bytes.size());
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

/// Accumulates accepted rows and enforces the unit-norm/non-parallel rules.
class SubsetBuilder {
 public:
  SubsetBuilder(Eigen::Index dim, Eigen::Index n_max, const WarningSink& warn)
      : X_(n_max, dim), y_(n_max), n_max_(n_max), warn_(warn) {}

  bool full() const { return count_ >= n_max_; }

  void offer(const unsigned char* pixels, Eigen::Index dim, double label, std::size_t index) {
    Eigen::RowVectorXd row(dim);
    for (Eigen::Index c = 0; c < dim; ++c) row(c) = static_cast<double>(pixels[c]) / 255.0;
    const double norm = row.norm();
    if (norm == 0.0) {
      if (warn_) warn_("instance " + std::to_string(index) + " is all zero; dropped");
      return;
    }
    row /= norm;
    if (parallel_to_any(X_, count_, row)) {
      if (warn_) warn_("instance " + std::to_string(index) + " duplicates an earlier row; dropped");
      return;
    }
    X_.row(count_) = row;
    y_(count_) = label;
    ++count_;
  }

  Dataset<double> finish(bool seen_a, bool seen_b, std::size_t end_offset) {
    if (!seen_a || !seen_b) {
      throw FormatError(std::string("class ") + (seen_a ? "b" : "a") + " absent from file",
                        end_offset);
    }
    Dataset<double> data{X_.topRows(count_), y_.head(count_)};
    return data;
  }

 private:
  Eigen::MatrixXd X_;
  Eigen::VectorXd y_;
  Eigen::Index count_ = 0;
  Eigen::Index n_max_;
  const WarningSink& warn_;
};

Dataset<double> load_idx(const std::filesystem::path& images_path,
                         const std::filesystem::path& labels_path, int class_a, int class_b,
                         Eigen::Index n_max, const WarningSink& warn) {
  const auto images = read_all(images_path);
  const auto labels = read_all(labels_path);

  if (read_be32(labels, 0, "label file") != kIdxLabelMagic) {
    throw FormatError("label file: bad magic number", 0);
  }
  if (read_be32(images, 0, "image file") != kIdxImageMagic) {
    throw FormatError("image file: bad magic number", 0);
  }
  const std::size_t label_count = read_be32(labels, 4, "label file");
  const std::size_t image_count = read_be32(images, 4, "image file");
  const std::size_t rows = read_be32(images, 8, "image file");
  const std::size_t cols = read_be32(images, 12, "image file");
  if (label_count != image_count) {
    throw FormatError("image count " + std::to_string(image_count) +
                          " differs from label count " + std::to_string(label_count),
                      4);
  }
  const std::size_t dim = rows * cols;
  if (dim == 0) throw FormatError("image file: zero-sized images", 8);
  if (labels.size() < 8 + label_count) {
    throw FormatError("label file: truncated", labels.size());
  }
  if (images.size() < 16 + image_count * dim) {
    throw FormatError("image file: truncated", images.size());
  }

  SubsetBuilder builder(static_cast<Eigen::Index>(dim), n_max, warn);
  bool seen_a = false, seen_b = false;
  for (std::size_t k = 0; k < image_count && !builder.full(); ++k) {
    const int label = labels[8 + k];
    if (label != class_a && label != class_b) continue;
    (label == class_a ? seen_a : seen_b) = true;
    builder.offer(&images[16 + k * dim], static_cast<Eigen::Index>(dim),
                  label == class_a ? 1.0 : -1.0, k);
  }
  return builder.finish(seen_a, seen_b, labels.size());
}

Dataset<double> load_cifar(const std::filesystem::path& path, int class_a, int class_b,
                           Eigen::Index n_max, const WarningSink& warn) {
  const auto bytes = read_all(path);
  if (bytes.empty() || bytes.size() % kCifarRecordBytes != 0) {
    throw FormatError("CIFAR file: size is not a multiple of the 3073-byte record",
                      bytes.size() - bytes.size() % kCifarRecordBytes);
  }
  const std::size_t records = bytes.size() / kCifarRecordBytes;
  SubsetBuilder builder(static_cast<Eigen::Index>(kCifarImageBytes), n_max, warn);
  bool seen_a = false, seen_b = false;
  for (std::size_t k = 0; k < records && !builder.full(); ++k) {
    const std::size_t offset = k * kCifarRecordBytes;
    const int label = bytes[offset];
    if (label > 9) throw FormatError("CIFAR file: label out of range", offset);
    if (label != class_a && label != class_b) continue;
    (label == class_a ? seen_a : seen_b) = true;
    builder.offer(&bytes[offset + 1], static_cast<Eigen::Index>(kCifarImageBytes),
                  label == class_a ? 1.0 : -1.0, k);
  }
  return builder.finish(seen_a, seen_b, bytes.size());
}

}  // namespace

Dataset<double> gen_synthetic(Eigen::Index n, Eigen::Index d, Rng& rng) {
  if (n < 2 || d < 2) throw InvalidInput("gen_synthetic: need n >= 2 and d >= 2");
  Dataset<double> data{Eigen::MatrixXd(n, d), Eigen::VectorXd(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    int attempt = 0;
    for (;; ++attempt) {
      if (attempt > kMaxRetries) {
        throw GenerationError("gen_synthetic: retry budget exhausted at row " + std::to_string(i));
      }
      Eigen::RowVectorXd row = sample_normal(rng, d).transpose();
      const double norm = row.norm();
      if (norm == 0.0) continue;
      row /= norm;
      if (!parallel_to_any(data.X, i, row)) {
        data.X.row(i) = row;
        break;
      }
    }
  }
  data.y = sample_rademacher(rng, n);
  return data;
}

Dataset<double> load_binary_subset(BinaryFormat format, const std::filesystem::path& images_path,
                                   const std::filesystem::path& labels_path, int class_a,
                                   int class_b, Eigen::Index n_max, const WarningSink& warn) {
  if (n_max < 2) throw InvalidInput("load_binary_subset: n_max must be >= 2");
  if (class_a == class_b) throw InvalidInput("load_binary_subset: classes must differ");
  Dataset<double> data = format == BinaryFormat::IDX
                             ? load_idx(images_path, labels_path, class_a, class_b, n_max, warn)
                             : load_cifar(images_path, class_a, class_b, n_max, warn);
  validate_dataset(data);
  return data;
}

}  // namespace mntk
