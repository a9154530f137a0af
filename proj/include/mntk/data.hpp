#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>

#include "mntk/model.hpp"
#include "mntk/numerics.hpp"

namespace mntk {

/// n points uniform on the unit sphere in R^d (normalized Gaussians) with
/// i.i.d. +-1 labels. A row within 1e-6 of parallel to an earlier row is
/// redrawn, up to 1000 times per row.
Dataset<double> gen_synthetic(Eigen::Index n, Eigen::Index d, Rng& rng);

enum class BinaryFormat { IDX, CIFAR_BIN };

using WarningSink = std::function<void(const std::string&)>;

/// Reads the first n_max instances of class_a (label +1) and class_b (label -1)
/// in file order. Pixels are scaled to [0, 1] and each row is normalized to
/// unit length; rows parallel to an earlier row (or all-zero) are dropped with
/// a warning. IDX needs separate image and label files; CIFAR_BIN reads labels
/// from the record stream and ignores `labels_path`.
Dataset<double> load_binary_subset(BinaryFormat format, const std::filesystem::path& images_path,
                                   const std::filesystem::path& labels_path, int class_a,
                                   int class_b, Eigen::Index n_max,
                                   const WarningSink& warn = {});

inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;
inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::size_t kCifarImageBytes = 3072;
inline constexpr std::size_t kCifarRecordBytes = 1 + kCifarImageBytes;

}  // namespace mntk
