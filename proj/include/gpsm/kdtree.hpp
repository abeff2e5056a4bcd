#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

namespace gpsm {

/// Static k-d tree for exact single-nearest-neighbor queries under squared
/// Euclidean distance.
///
/// Results are identical to a brute-force scan that computes
/// sum_d (q_d - p_d)^2 in dimension order: a subtree is skipped only when
/// its splitting-plane bound strictly exceeds the current best, so every
/// point at the best distance is visited and ties resolve through
/// `prefer` (if at the best distance) and then the smallest label.
class KdTree {
 public:
  struct Hit {
    std::ptrdiff_t label = -1;
    double distance2 = std::numeric_limits<double>::infinity();
  };

  KdTree() = default;

  /// `points` is row-major (one point per row); `labels[r]` is reported for
  /// row r.
  KdTree(Eigen::MatrixXd points, std::vector<std::ptrdiff_t> labels)
      : points_(std::move(points)), labels_(std::move(labels)) {
    order_.resize(points_.rows());
    std::iota(order_.begin(), order_.end(), std::ptrdiff_t{0});
    if (points_.rows() > 0) build(0, static_cast<std::ptrdiff_t>(order_.size()));
  }

  std::ptrdiff_t size() const noexcept { return points_.rows(); }
  std::ptrdiff_t dims() const noexcept { return points_.cols(); }

  /// Nearest point to `q`. `exclude` (a label) is never returned; `prefer`
  /// (a label) wins ties at the minimum distance.
  Hit nearest(const double* q, std::ptrdiff_t exclude = -1,
              std::ptrdiff_t prefer = -1) const {
    Hit best;
    if (!nodes_.empty()) search(0, q, exclude, prefer, best);
    return best;
  }

 private:
  static constexpr std::ptrdiff_t kLeafSize = 8;

  struct Node {
    std::ptrdiff_t begin, end;  // range in order_
    std::ptrdiff_t left = -1, right = -1;
    std::ptrdiff_t dim = 0;
    double split = 0.0;
  };

  std::ptrdiff_t build(std::ptrdiff_t begin, std::ptrdiff_t end) {
    const std::ptrdiff_t id = static_cast<std::ptrdiff_t>(nodes_.size());
    nodes_.push_back(Node{begin, end});
    if (end - begin <= kLeafSize) return id;

    std::ptrdiff_t dim = 0;
    double widest = -1.0;
    for (std::ptrdiff_t d = 0; d < points_.cols(); ++d) {
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      for (std::ptrdiff_t r = begin; r < end; ++r) {
        const double v = points_(order_[r], d);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (hi - lo > widest) {
        widest = hi - lo;
        dim = d;
      }
    }
    if (widest <= 0.0) return id;  // all points identical: keep as leaf

    const std::ptrdiff_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid,
                     order_.begin() + end,
                     [&](std::ptrdiff_t a, std::ptrdiff_t b) {
                       return points_(a, dim) < points_(b, dim);
                     });
    const double split = points_(order_[mid], dim);
    const std::ptrdiff_t left = build(begin, mid);
    const std::ptrdiff_t right = build(mid, end);
    Node& n = nodes_[id];
    n.dim = dim;
    n.split = split;
    n.left = left;
    n.right = right;
    return id;
  }

  static bool better(const Hit& cand, const Hit& best, std::ptrdiff_t prefer) {
    if (cand.distance2 < best.distance2) return true;
    if (cand.distance2 > best.distance2) return false;
    if (best.label == prefer) return false;
    if (cand.label == prefer) return true;
    return cand.label < best.label;
  }

  void search(std::ptrdiff_t id, const double* q, std::ptrdiff_t exclude,
              std::ptrdiff_t prefer, Hit& best) const {
    const Node& n = nodes_[id];
    if (n.left < 0) {
      for (std::ptrdiff_t r = n.begin; r < n.end; ++r) {
        const std::ptrdiff_t row = order_[r];
        const std::ptrdiff_t label = labels_[row];
        if (label == exclude) continue;
        double d2 = 0.0;
        for (std::ptrdiff_t d = 0; d < points_.cols(); ++d) {
          const double diff = q[d] - points_(row, d);
          d2 += diff * diff;
        }
        const Hit cand{label, d2};
        if (better(cand, best, prefer)) best = cand;
      }
      return;
    }
    const double diff = q[n.dim] - n.split;
    const std::ptrdiff_t near = diff < 0.0 ? n.left : n.right;
    const std::ptrdiff_t far = diff < 0.0 ? n.right : n.left;
    search(near, q, exclude, prefer, best);
    if (diff * diff <= best.distance2) search(far, q, exclude, prefer, best);
  }

  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> points_;
  std::vector<std::ptrdiff_t> labels_;
  std::vector<std::ptrdiff_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace gpsm
