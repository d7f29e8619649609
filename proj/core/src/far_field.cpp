#include "gravalloc/far_field.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "gravalloc/parallel.hpp"

namespace gravalloc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

int default_order(int d) {
  if (d == 3) return 6;
  if (d == 4) return 5;
  return 4;
}

void lagrange_basis(double t, const std::vector<double>& nodes, const std::vector<double>& bary, double* out) {
  const std::size_t m = nodes.size();
  for (std::size_t j = 0; j < m; ++j) {
    if (t == nodes[j]) {
      for (std::size_t i = 0; i < m; ++i) out[i] = i == j ? 1.0 : 0.0;
      return;
    }
  }
  double s = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    out[j] = bary[j] / (t - nodes[j]);
    s += out[j];
  }
  for (std::size_t j = 0; j < m; ++j) out[j] /= s;
}

/// acc[node * D + k] += sum over sources of (z - node) / |z - node|^D, sources in SoA layout.
template <int D>
void direct_at_nodes(const std::vector<double>& node_pos, const std::vector<double>& src, std::size_t ns,
                     std::vector<double>& acc) {
  const std::size_t nn = node_pos.size() / D;
  const double* __restrict s0 = src.data();
  const double* __restrict s1 = s0 + ns;
  const double* __restrict s2 = s1 + ns;
  const double* __restrict s3 = D > 3 ? s2 + ns : s2;
  const double* __restrict s4 = D > 4 ? s3 + ns : s3;
  const double* __restrict s5 = D > 5 ? s4 + ns : s4;
  const double* __restrict s6 = D > 6 ? s5 + ns : s5;
  const double* __restrict s7 = D > 7 ? s6 + ns : s6;
  for (std::size_t n = 0; n < nn; ++n) {
    const double* x = &node_pos[n * D];
    const double x0 = x[0], x1 = x[1], x2 = x[2];
    const double x3 = D > 3 ? x[3] : 0.0, x4 = D > 4 ? x[4] : 0.0, x5 = D > 5 ? x[5] : 0.0;
    const double x6 = D > 6 ? x[6] : 0.0, x7 = D > 7 ? x[7] : 0.0;
    double f0 = 0.0, f1 = 0.0, f2 = 0.0, f3 = 0.0, f4 = 0.0, f5 = 0.0, f6 = 0.0, f7 = 0.0;
#pragma omp simd reduction(+ : f0, f1, f2, f3, f4, f5, f6, f7)
    for (std::size_t j = 0; j < ns; ++j) {
      const double d0 = s0[j] - x0, d1 = s1[j] - x1, d2 = s2[j] - x2;
      double r2 = d0 * d0 + d1 * d1 + d2 * d2;
      double d3 = 0.0, d4 = 0.0, d5 = 0.0, d6 = 0.0, d7 = 0.0;
      if constexpr (D > 3) { d3 = s3[j] - x3; r2 += d3 * d3; }
      if constexpr (D > 4) { d4 = s4[j] - x4; r2 += d4 * d4; }
      if constexpr (D > 5) { d5 = s5[j] - x5; r2 += d5 * d5; }
      if constexpr (D > 6) { d6 = s6[j] - x6; r2 += d6 * d6; }
      if constexpr (D > 7) { d7 = s7[j] - x7; r2 += d7 * d7; }
      const double ir2 = 1.0 / r2;
      double w = 1.0;
      for (int k = 0; k < D / 2; ++k) w *= ir2;
      if constexpr (D % 2 == 1) w *= std::sqrt(ir2);
      f0 += d0 * w;
      f1 += d1 * w;
      f2 += d2 * w;
      if constexpr (D > 3) f3 += d3 * w;
      if constexpr (D > 4) f4 += d4 * w;
      if constexpr (D > 5) f5 += d5 * w;
      if constexpr (D > 6) f6 += d6 * w;
      if constexpr (D > 7) f7 += d7 * w;
    }
    const double fs[8] = {f0, f1, f2, f3, f4, f5, f6, f7};
    for (int k = 0; k < D; ++k) acc[n * D + k] += fs[k];
  }
}

void direct_at_nodes(int d, const std::vector<double>& node_pos, const std::vector<double>& src, std::size_t ns,
                     std::vector<double>& acc) {
  switch (d) {
    case 3: return direct_at_nodes<3>(node_pos, src, ns, acc);
    case 4: return direct_at_nodes<4>(node_pos, src, ns, acc);
    case 5: return direct_at_nodes<5>(node_pos, src, ns, acc);
    case 6: return direct_at_nodes<6>(node_pos, src, ns, acc);
    case 7: return direct_at_nodes<7>(node_pos, src, ns, acc);
    case 8: return direct_at_nodes<8>(node_pos, src, ns, acc);
    default: throw ValidationError("unsupported dimension");
  }
}

}  // namespace

HierarchicalField::HierarchicalField(std::shared_ptr<const FieldModel> model, FarFieldOptions options)
    : model_(std::move(model)), options_(options) {
  if (!model_) throw ValidationError("hierarchical field needs a model");
  d_ = model_->dim();
  order_ = options_.order > 0 ? options_.order : default_order(d_);
  if (order_ < 1 || order_ > 16) throw ValidationError("Chebyshev order must be in [1, 16]");
  if (!(options_.leaf_occupancy > 0.0)) throw ValidationError("leaf occupancy must be positive");
  nodes_1d_ = order_ + 1;
  nodes_ = 1;
  for (int k = 0; k < d_; ++k) nodes_ *= static_cast<std::size_t>(nodes_1d_);

  const Ball& t = model_->truncation();
  root_lo_ = t.center - Vec::filled(d_, t.radius);
  root_side_ = 2.0 * t.radius;

  const double lambda = model_->config().intensity();
  const int max_level = std::min(63 / d_, 12);
  leaf_level_ = 2;
  while (leaf_level_ < max_level &&
         lambda * std::pow(root_side_ / std::ldexp(1.0, leaf_level_), d_) > options_.leaf_occupancy) {
    ++leaf_level_;
  }

  const int m = nodes_1d_;
  cheb_.resize(m);
  bary_.resize(m);
  for (int j = 0; j < m; ++j) {
    const double a = (2.0 * j + 1.0) * std::numbers::pi / (2.0 * m);
    cheb_[j] = std::cos(a);
    bary_[j] = (j % 2 == 0 ? 1.0 : -1.0) * std::sin(a);
  }
  for (int b = 0; b < 2; ++b) {
    transfer_[b].assign(static_cast<std::size_t>(m) * m, 0.0);
    for (int i = 0; i < m; ++i) {
      const double s = 0.5 * (cheb_[i] + (b == 0 ? -1.0 : 1.0));
      lagrange_basis(s, cheb_, bary_, &transfer_[b][static_cast<std::size_t>(i) * m]);
    }
  }

  // Star lists per level, stable in summation order within each cell.
  const auto& active = model_->active_stars();
  const auto& cfg = model_->config();
  levels_.resize(leaf_level_ + 1);
  for (int level = 2; level <= leaf_level_; ++level) {
    std::vector<std::pair<std::uint64_t, std::size_t>> keyed;
    keyed.reserve(active.size());
    for (std::size_t j = 0; j < active.size(); ++j) {
      keyed.emplace_back(key_of(cell_of(cfg.star(active[j]), level), level), j);
    }
    std::stable_sort(keyed.begin(), keyed.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    Level& lv = levels_[level];
    for (std::size_t i = 0; i < keyed.size(); ++i) {
      if (lv.keys.empty() || lv.keys.back() != keyed[i].first) {
        lv.keys.push_back(keyed[i].first);
        lv.starts.push_back(static_cast<std::uint32_t>(i));
      }
      const std::size_t id = active[keyed[i].second];
      lv.ids.push_back(id);
      const Point& z = cfg.star(id);
      for (int k = 0; k < d_; ++k) lv.coords.push_back(z[k]);
    }
    lv.starts.push_back(static_cast<std::uint32_t>(keyed.size()));
  }
}

std::uint64_t HierarchicalField::key_of(const std::array<std::int64_t, kMaxDim>& idx, int level) const {
  std::uint64_t key = 0;
  for (int k = d_ - 1; k >= 0; --k) key = (key << level) | static_cast<std::uint64_t>(idx[k]);
  return key;
}

std::array<std::int64_t, kMaxDim> HierarchicalField::cell_of(const Point& x, int level) const {
  std::array<std::int64_t, kMaxDim> idx{};
  const std::int64_t n = std::int64_t{1} << level;
  const double side = root_side_ / static_cast<double>(n);
  for (int k = 0; k < d_; ++k) {
    const auto i = static_cast<std::int64_t>(std::floor((x[k] - root_lo_[k]) / side));
    idx[k] = std::clamp<std::int64_t>(i, 0, n - 1);
  }
  return idx;
}

std::pair<std::uint32_t, std::uint32_t> HierarchicalField::star_range(int level, std::uint64_t key) const {
  const Level& lv = levels_[level];
  const auto it = std::lower_bound(lv.keys.begin(), lv.keys.end(), key);
  if (it == lv.keys.end() || *it != key) return {0, 0};
  const auto pos = static_cast<std::size_t>(it - lv.keys.begin());
  return {lv.starts[pos], lv.starts[pos + 1]};
}

void HierarchicalField::build_cell(int level, const std::array<std::int64_t, kMaxDim>& idx, Cell& out) const {
  const int d = d_;
  const int m = nodes_1d_;
  const std::int64_t n = std::int64_t{1} << level;
  const double side = root_side_ / static_cast<double>(n);

  // Start from the parent's interpolant evaluated at this cell's nodes.
  out.values.assign(nodes_ * d, 0.0);
  if (level > 2) {
    std::array<std::int64_t, kMaxDim> pidx{};
    for (int k = 0; k < d; ++k) pidx[k] = idx[k] >> 1;
    const auto& parent = levels_[level - 1].cells.at(key_of(pidx, level - 1));
    std::vector<double> cur = parent.values, next(nodes_ * d);
    std::size_t stride = 1;
    for (int axis = 0; axis < d; ++axis) {
      const double* t = transfer_[idx[axis] & 1].data();
      const std::size_t outer = nodes_ / (stride * m);
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t s = 0; s < stride; ++s) {
          const std::size_t base = o * stride * m + s;
          for (int i = 0; i < m; ++i) {
            double acc[kMaxDim] = {};
            for (int j = 0; j < m; ++j) {
              const double w = t[i * m + j];
              const double* src = &cur[(base + j * stride) * d];
              for (int c = 0; c < d; ++c) acc[c] += w * src[c];
            }
            double* dst = &next[(base + i * stride) * d];
            for (int c = 0; c < d; ++c) dst[c] = acc[c];
          }
        }
      }
      std::swap(cur, next);
      stride *= m;
    }
    out.values = std::move(cur);
  }

  // Interaction list: children of the parent's neighbours that are not our neighbours.
  std::vector<double> src_aos;
  std::array<std::int64_t, kMaxDim> pidx{};
  for (int k = 0; k < d; ++k) pidx[k] = idx[k] >> 1;
  const std::int64_t pn = n >> 1;
  std::array<int, kMaxDim> off{};
  for (int k = 0; k < d; ++k) off[k] = -1;
  for (;;) {
    bool inside = true;
    for (int k = 0; k < d; ++k) {
      const std::int64_t q = pidx[k] + off[k];
      if (q < 0 || q >= pn) inside = false;
    }
    if (inside) {
      for (int bits = 0; bits < (1 << d); ++bits) {
        std::array<std::int64_t, kMaxDim> j{};
        bool neighbour = true;
        for (int k = 0; k < d; ++k) {
          j[k] = 2 * (pidx[k] + off[k]) + ((bits >> k) & 1);
          if (std::abs(j[k] - idx[k]) > 1) neighbour = false;
        }
        if (neighbour) continue;
        const auto [b, e] = star_range(level, key_of(j, level));
        const auto& coords = levels_[level].coords;
        src_aos.insert(src_aos.end(), coords.begin() + b * d, coords.begin() + e * d);
      }
    }
    int k = 0;
    while (k < d && ++off[k] == 2) off[k++] = -1;
    if (k == d) break;
  }
  const std::size_t ns = src_aos.size() / d;
  if (ns > 0) {
    std::vector<double> src(src_aos.size());
    for (std::size_t s = 0; s < ns; ++s)
      for (int k = 0; k < d; ++k) src[k * ns + s] = src_aos[s * d + k];
    std::vector<double> node_pos(nodes_ * d);
    for (std::size_t node = 0; node < nodes_; ++node) {
      std::size_t rem = node;
      for (int k = 0; k < d; ++k) {
        const int i = static_cast<int>(rem % m);
        rem /= m;
        node_pos[node * d + k] = root_lo_[k] + side * (static_cast<double>(idx[k]) + 0.5 * (cheb_[i] + 1.0));
      }
    }
    direct_at_nodes(d, node_pos, src, ns, out.values);
  }

  if (level == leaf_level_) {
    for (int k = 0; k < d; ++k) {
      out.block_lo[k] = idx[k] > 0 ? root_lo_[k] + side * static_cast<double>(idx[k] - 1) : -kInf;
      out.block_hi[k] = idx[k] + 1 < n ? root_lo_[k] + side * static_cast<double>(idx[k] + 2) : kInf;
    }
    std::array<int, kMaxDim> o{};
    for (int k = 0; k < d; ++k) o[k] = -1;
    for (;;) {
      std::array<std::int64_t, kMaxDim> j{};
      bool inside = true;
      for (int k = 0; k < d; ++k) {
        j[k] = idx[k] + o[k];
        if (j[k] < 0 || j[k] >= n) inside = false;
      }
      if (inside) {
        const auto [b, e] = star_range(level, key_of(j, level));
        const Level& lv = levels_[level];
        out.near_coords.insert(out.near_coords.end(), lv.coords.begin() + b * d, lv.coords.begin() + e * d);
        out.near_ids.insert(out.near_ids.end(), lv.ids.begin() + b, lv.ids.begin() + e);
      }
      int k = 0;
      while (k < d && ++o[k] == 2) o[k++] = -1;
      if (k == d) break;
    }
  }
}

void HierarchicalField::prepare(const Region& region) {
  if (region.dim() != d_) throw ValidationError("region dimension does not match the field");
  if (!region.bounded()) throw UnsupportedRegionError("cannot prepare an unbounded region");
  const Point& c = region.center();
  const double hw = region.bounding_halfwidth();
  const bool is_box = region.get_if<Box>() != nullptr;
  const double reach = region.outer_radius();

  const int L = leaf_level_;
  const std::int64_t n = std::int64_t{1} << L;
  const double side = root_side_ / static_cast<double>(n);
  std::array<std::int64_t, kMaxDim> lo{}, hi{};
  for (int k = 0; k < d_; ++k) {
    lo[k] = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor((c[k] - hw - root_lo_[k]) / side)), 0, n - 1);
    hi[k] = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor((c[k] + hw - root_lo_[k]) / side)), 0, n - 1);
  }

  std::vector<std::array<std::int64_t, kMaxDim>> leaves;
  std::array<std::int64_t, kMaxDim> idx = lo;
  for (;;) {
    bool keep = true;
    if (!is_box) {
      double s = 0.0;
      for (int k = 0; k < d_; ++k) {
        const double a = root_lo_[k] + side * static_cast<double>(idx[k]);
        const double b = a + side;
        const double t = c[k] < a ? a - c[k] : (c[k] > b ? c[k] - b : 0.0);
        s += t * t;
      }
      keep = std::sqrt(s) <= reach;
    }
    if (keep && !levels_[L].cells.contains(key_of(idx, L))) leaves.push_back(idx);
    int k = 0;
    while (k < d_ && ++idx[k] > hi[k]) {
      idx[k] = lo[k];
      ++k;
    }
    if (k == d_) break;
  }

  for (int level = 2; level <= L; ++level) {
    std::vector<std::array<std::int64_t, kMaxDim>> todo;
    std::vector<std::uint64_t> keys;
    for (const auto& leaf : leaves) {
      std::array<std::int64_t, kMaxDim> a{};
      for (int k = 0; k < d_; ++k) a[k] = leaf[k] >> (L - level);
      const std::uint64_t key = key_of(a, level);
      if (levels_[level].cells.contains(key)) continue;
      keys.push_back(key);
      todo.push_back(a);
    }
    std::vector<std::size_t> order(keys.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
    order.erase(std::unique(order.begin(), order.end(),
                            [&](std::size_t a, std::size_t b) { return keys[a] == keys[b]; }),
                order.end());
    std::vector<Cell> built(order.size());
    parallel_for(order.size(), options_.threads, [&](std::size_t i) { build_cell(level, todo[order[i]], built[i]); });
    for (std::size_t i = 0; i < order.size(); ++i) levels_[level].cells.emplace(keys[order[i]], std::move(built[i]));
  }
}

FieldSample HierarchicalField::sample(const Point& x) const {
  const int d = d_;
  if (x.dim() != d) throw ValidationError("query point dimension does not match the configuration");
  if (!x.finite()) throw ValidationError("query point is not finite");
  const Ball& trunc = model_->truncation();
  if (model_->compensated() && distance(x, trunc.center) > trunc.radius) {
    throw DomainError("query point lies outside the truncation ball");
  }
  for (int k = 0; k < d; ++k) {
    if (x[k] < root_lo_[k] || x[k] > root_lo_[k] + root_side_) return model_->sample(x);
  }
  const int L = leaf_level_;
  const auto idx = cell_of(x, L);
  const auto& cells = levels_[L].cells;
  const auto it = cells.find(key_of(idx, L));
  if (it == cells.end()) return model_->sample(x);
  const Cell& cell = it->second;

  const int m = nodes_1d_;
  const double side = root_side_ / static_cast<double>(std::int64_t{1} << L);
  double basis[kMaxDim][17];
  for (int k = 0; k < d; ++k) {
    const double lo = root_lo_[k] + side * static_cast<double>(idx[k]);
    const double t = std::clamp(2.0 * (x[k] - lo) / side - 1.0, -1.0, 1.0);
    lagrange_basis(t, cheb_, bary_, basis[k]);
  }
  thread_local std::vector<double> buf_a, buf_b;
  buf_a.resize(nodes_ / m * d);
  buf_b.resize(nodes_ / m * d);
  const double* cur = cell.values.data();
  std::size_t count = nodes_;
  for (int k = 0; k < d; ++k) {
    const std::size_t outer = count / m;
    double* dst = (k % 2 == 0) ? buf_a.data() : buf_b.data();
    for (std::size_t o = 0; o < outer; ++o) {
      double acc[kMaxDim] = {};
      const double* src = cur + o * m * d;
      for (int j = 0; j < m; ++j) {
        const double w = basis[k][j];
        for (int c = 0; c < d; ++c) acc[c] += w * src[j * d + c];
      }
      for (int c = 0; c < d; ++c) dst[o * d + c] = acc[c];
    }
    cur = dst;
    count = outer;
  }

  FieldSample s;
  s.force = Vec(d);
  for (int c = 0; c < d; ++c) s.force[c] = cur[c];

  double best = kInf, second = kInf;
  std::size_t best_i = kNoStar;
  const std::size_t nn = cell.near_ids.size();
  Vec near(d);
  for (std::size_t j = 0; j < nn; ++j) {
    const double* z = &cell.near_coords[j * d];
    double diff[kMaxDim];
    double r2 = 0.0;
    for (int k = 0; k < d; ++k) {
      diff[k] = z[k] - x[k];
      r2 += diff[k] * diff[k];
    }
    if (r2 < best) {
      second = best;
      best = r2;
      best_i = cell.near_ids[j];
    } else if (r2 < second) {
      second = r2;
    }
    if (r2 == 0.0) continue;
    const double ir2 = 1.0 / r2;
    double w = 1.0;
    for (int k = 0; k < d / 2; ++k) w *= ir2;
    if (d % 2 == 1) w *= std::sqrt(ir2);
    for (int k = 0; k < d; ++k) near[k] += diff[k] * w;
  }
  if (best_i != kNoStar && std::sqrt(best) < kSingularityGuard) {
    throw SingularityError("evaluation point coincides with a star", best_i);
  }
  s.force += near;
  if (model_->compensated()) s.force += kappa(d) * (x - trunc.center);

  double boundary = kInf;
  for (int k = 0; k < d; ++k) boundary = std::min({boundary, x[k] - cell.block_lo[k], cell.block_hi[k] - x[k]});
  s.nearest = best_i;
  s.nearest_distance = std::sqrt(best);
  s.second_distance = std::min(std::sqrt(second), boundary);
  return s;
}

}  // namespace gravalloc
