#pragma once

#include <cstdint>
#include <memory>
#include <unordered_map>
#include <vector>

#include "gravalloc/field.hpp"

namespace gravalloc {

struct FarFieldOptions {
  int order = 0;                ///< Chebyshev degree per axis; 0 picks a default by dimension
  double leaf_occupancy = 2.0;  ///< target expected stars per leaf cell
  int threads = 0;              ///< build parallelism; 0 uses default_thread_count()
};

/// Accelerated evaluator for the compensated field of a FieldModel.
///
/// The cube circumscribing the truncation ball is refined into a 2^d-tree. For a
/// leaf cell the stars of its 3^d neighbour block are summed exactly, and all
/// other stars enter through a tensor Chebyshev interpolant of their field over
/// the cell. Interpolants are built top-down (parent interpolant evaluated at the
/// child's nodes plus direct sums over the interaction list) for the leaves that
/// meet the prepared region; queries elsewhere fall back to exact summation.
class HierarchicalField : public ForceSource {
 public:
  explicit HierarchicalField(std::shared_ptr<const FieldModel> model, FarFieldOptions options = {});

  /// Builds interpolants for every leaf meeting `region`. Not thread-safe with concurrent sample().
  void prepare(const Region& region);

  int dim() const override { return model_->dim(); }
  const StarConfig& config() const override { return model_->config(); }
  const Ball& truncation() const override { return model_->truncation(); }
  bool compensated() const override { return model_->compensated(); }
  FieldSample sample(const Point& x) const override;
  Vec force(const Point& x) const { return sample(x).force; }

  const FieldModel& model() const noexcept { return *model_; }
  int order() const noexcept { return order_; }
  int leaf_level() const noexcept { return leaf_level_; }
  std::size_t built_leaves() const noexcept { return levels_.empty() ? 0 : levels_.back().cells.size(); }

 private:
  struct Cell {
    std::vector<double> values;       // far field at nodes, [node * d + component]
    std::vector<double> near_coords;  // stars of the 3^d block, flat
    std::vector<std::size_t> near_ids;
    std::array<double, kMaxDim> block_lo{}, block_hi{};  // +-inf where the block reaches the root boundary
  };
  struct Level {
    std::vector<std::uint64_t> keys;    // occupied cells, sorted
    std::vector<std::uint32_t> starts;  // keys.size() + 1 offsets into coords/ids
    std::vector<double> coords;
    std::vector<std::size_t> ids;
    std::unordered_map<std::uint64_t, Cell> cells;  // built interpolants
  };

  std::uint64_t key_of(const std::array<std::int64_t, kMaxDim>& idx, int level) const;
  std::array<std::int64_t, kMaxDim> cell_of(const Point& x, int level) const;
  void build_cell(int level, const std::array<std::int64_t, kMaxDim>& idx, Cell& out) const;
  std::pair<std::uint32_t, std::uint32_t> star_range(int level, std::uint64_t key) const;

  std::shared_ptr<const FieldModel> model_;
  FarFieldOptions options_;
  int d_;
  int order_;
  int nodes_1d_;
  std::size_t nodes_;
  int leaf_level_;
  Point root_lo_;
  double root_side_;
  std::vector<double> cheb_;     // first-kind Chebyshev points on [-1, 1]
  std::vector<double> bary_;     // barycentric weights
  std::vector<double> transfer_[2];  // child-half interpolation matrices [child node][parent node]
  std::vector<Level> levels_;    // index = level
};

}  // namespace gravalloc
