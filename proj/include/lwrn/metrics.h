#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace lwrn {

inline constexpr int kIgnoreLabel = 255;

// Rows are ground truth, columns predictions.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes);

  int num_classes() const { return k_; }
  int64_t at(int gt, int pred) const { return counts_[static_cast<size_t>(gt) * k_ + pred]; }
  int64_t total() const;

  // Pixels whose ground truth is the ignore label are skipped. Any other
  // label outside [0, K) throws DataError.
  void update(std::span<const uint8_t> pred, std::span<const uint8_t> gt);

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  int k_;
  std::vector<int64_t> counts_;
};

// Per-class IoU; classes absent from both ground truth and prediction are
// reported as NaN.
std::vector<double> class_iou(const ConfusionMatrix& cm);

// Mean over classes present in ground truth or prediction; 0 when no pixel
// was scored.
double mean_iou(const ConfusionMatrix& cm);

std::string render_kv(const ConfusionMatrix& cm);

}  // namespace lwrn
