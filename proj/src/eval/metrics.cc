#include "lwrn/metrics.h"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "lwrn/errors.h"

namespace lwrn {

ConfusionMatrix::ConfusionMatrix(int num_classes) : k_(num_classes) {
  if (num_classes < 1 || num_classes > kIgnoreLabel) {
    throw DataError("class count must be in [1, 255), got " + std::to_string(num_classes));
  }
  counts_.assign(static_cast<size_t>(k_) * k_, 0);
}

int64_t ConfusionMatrix::total() const {
  int64_t t = 0;
  for (int64_t c : counts_) t += c;
  return t;
}

void ConfusionMatrix::update(std::span<const uint8_t> pred, std::span<const uint8_t> gt) {
  if (pred.size() != gt.size()) {
    throw DimensionError("label maps differ in size: " + std::to_string(pred.size()) + " vs " +
                         std::to_string(gt.size()));
  }
  auto check = [&](uint8_t label, size_t i, const char* which) {
    if (label >= k_ && label != kIgnoreLabel) {
      throw DataError(std::string(which) + " label " + std::to_string(label) + " at pixel " +
                      std::to_string(i) + " is outside [0, " + std::to_string(k_) + ")");
    }
  };
  for (size_t i = 0; i < gt.size(); ++i) {
    check(gt[i], i, "ground-truth");
    check(pred[i], i, "predicted");
  }
  for (size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] == kIgnoreLabel) continue;
    if (pred[i] == kIgnoreLabel) {
      throw DataError("predicted label at pixel " + std::to_string(i) + " is the ignore label");
    }
    ++counts_[static_cast<size_t>(gt[i]) * k_ + pred[i]];
  }
}

std::vector<double> class_iou(const ConfusionMatrix& cm) {
  const int k = cm.num_classes();
  std::vector<double> iou(k, std::numeric_limits<double>::quiet_NaN());
  for (int c = 0; c < k; ++c) {
    const int64_t tp = cm.at(c, c);
    int64_t fp = 0, fn = 0;
    for (int o = 0; o < k; ++o) {
      if (o == c) continue;
      fp += cm.at(o, c);
      fn += cm.at(c, o);
    }
    const int64_t denom = tp + fp + fn;
    if (denom > 0) iou[c] = static_cast<double>(tp) / static_cast<double>(denom);
  }
  return iou;
}

double mean_iou(const ConfusionMatrix& cm) {
  double sum = 0;
  int present = 0;
  for (double v : class_iou(cm)) {
    if (std::isnan(v)) continue;
    sum += v;
    ++present;
  }
  return present == 0 ? 0.0 : sum / present;
}

std::string render_kv(const ConfusionMatrix& cm) {
  std::ostringstream out;
  char buf[64];
  out << "metrics.classes=" << cm.num_classes() << '\n';
  out << "metrics.pixels=" << cm.total() << '\n';
  std::snprintf(buf, sizeof(buf), "%.6f", mean_iou(cm));
  out << "metrics.mean_iou=" << buf << '\n';
  const auto iou = class_iou(cm);
  for (size_t c = 0; c < iou.size(); ++c) {
    if (std::isnan(iou[c])) continue;
    std::snprintf(buf, sizeof(buf), "%.6f", iou[c]);
    out << "metrics.iou." << c << '=' << buf << '\n';
  }
  return out.str();
}

}  // namespace lwrn
