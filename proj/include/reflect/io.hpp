#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "reflect/control.hpp"
#include "reflect/costbounds.hpp"
#include "reflect/discretize.hpp"
#include "reflect/geometry.hpp"
#include "reflect/transfer.hpp"

namespace reflect {

using Json = nlohmann::ordered_json;

//---------------------------------------------------------------------------//
// Scalars
//---------------------------------------------------------------------------//

/// Shortest round-trip decimal form; "inf", "-inf", "nan" for non-finite values.
inline std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

/// JSON has no infinities; they are written as the strings "inf" / "-inf".
inline Json number_json(double x) {
  if (std::isfinite(x)) return x;
  return format_number(x);
}

inline Json vector_json(std::span<const double> v) {
  Json out = Json::array();
  for (double x : v) out.push_back(number_json(x));
  return out;
}

inline Json vector_json(const Eigen::VectorXd& v) {
  return vector_json(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

//---------------------------------------------------------------------------//
// Geometry
//---------------------------------------------------------------------------//

inline Json hyperplane_json(const Hyperplane& h) {
  if (h.kind() == Hyperplane::Kind::coordinate) return Json{{"kind", "coordinate"}, {"axis", h.axis()}};
  return Json{{"kind", "sector_boundary"}, {"theta", h.angle()}};
}

inline Hyperplane hyperplane_from_json(const Json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "coordinate") return Hyperplane::coordinate(j.at("axis").get<int>());
  if (kind == "sector_boundary") return Hyperplane::sector_boundary(j.at("theta").get<double>());
  throw InvalidArgument("unknown hyperplane kind '" + kind + "'");
}

inline Json box_json(const Box& b) { return Json{{"lo", vector_json(b.lo)}, {"hi", vector_json(b.hi)}}; }

inline Json region_json(const RegionSet& s) {
  if (!s.valid()) throw InvalidArgument("cannot serialize an empty region handle");
  const auto& node = s.node();
  Json j;
  std::visit(
      [&](const auto& st) {
        using T = std::decay_t<decltype(st)>;
        if constexpr (std::is_same_v<T, FullSpace>) {
          j = Json{{"kind", "full_space"}, {"dim", node.dim}};
        } else if constexpr (std::is_same_v<T, EmptySet>) {
          j = Json{{"kind", "empty"}, {"dim", node.dim}};
        } else if constexpr (std::is_same_v<T, PeriodicBoxes>) {
          Json boxes = Json::array();
          for (const Box& b : st.boxes) boxes.push_back(box_json(b));
          j = Json{{"kind", "periodic_boxes"}, {"period", vector_json(st.period)}, {"boxes", boxes}};
        } else if constexpr (std::is_same_v<T, BallLattice>) {
          Json balls = Json::array();
          for (const LatticeBall& b : st.balls)
            balls.push_back(Json{{"index", b.index}, {"center", vector_json(b.center)}});
          j = Json{{"kind", "ball_lattice"}, {"dim", node.dim}, {"G", st.G}, {"delta", st.delta},
                   {"balls", balls}};
        } else if constexpr (std::is_same_v<T, CustomPredicate>) {
          throw UnsupportedConfiguration("custom predicate '" + st.label + "' cannot be serialized");
        } else if constexpr (std::is_same_v<T, Clipped>) {
          j = Json{{"kind", st.plane ? "clipped" : "clipped_orthant"}};
          if (st.plane) j["plane"] = hyperplane_json(*st.plane);
          j["base"] = region_json(st.base);
        } else if constexpr (std::is_same_v<T, Reflected>) {
          j = Json{{"kind", "reflected"}, {"plane", hyperplane_json(st.plane)}, {"base", region_json(st.base)}};
        } else if constexpr (std::is_same_v<T, UnionSet>) {
          Json m = Json::array();
          for (const RegionSet& r : st.members) m.push_back(region_json(r));
          j = Json{{"kind", "union"}, {"members", m}};
        } else if constexpr (std::is_same_v<T, AbsPullback>) {
          j = Json{{"kind", "abs_pullback"}, {"base", region_json(st.base)}};
        }
      },
      node.structure);
  return j;
}

namespace detail {

/// Rejects keys outside `allowed`.
inline void only_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw InvalidArgument(where + " must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    (void)v;
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; }))
      throw InvalidArgument("unknown key '" + k + "' in " + where);
  }
}

inline std::vector<double> doubles(const Json& j) { return j.get<std::vector<double>>(); }

}  // namespace detail

/// Inverse of region_json; unknown keys are rejected.
inline RegionSet region_from_json(const Json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  const std::string where = "region '" + kind + "'";
  if (kind == "full_space" || kind == "empty") {
    detail::only_keys(j, {"kind", "dim"}, where);
    const int d = j.at("dim").get<int>();
    return kind == "full_space" ? RegionSet::full_space(d) : RegionSet::empty(d);
  }
  if (kind == "periodic_boxes") {
    detail::only_keys(j, {"kind", "period", "boxes"}, where);
    std::vector<Box> boxes;
    for (const Json& b : j.at("boxes")) {
      detail::only_keys(b, {"lo", "hi"}, "box");
      boxes.push_back(Box{detail::doubles(b.at("lo")), detail::doubles(b.at("hi"))});
    }
    return RegionSet::periodic_boxes(detail::doubles(j.at("period")), std::move(boxes));
  }
  if (kind == "periodic_slabs") {
    detail::only_keys(j, {"kind", "dim", "period", "lo", "hi"}, where);
    return periodic_slabs(j.at("dim").get<int>(), j.at("period").get<double>(), j.at("lo").get<double>(),
                          j.at("hi").get<double>());
  }
  if (kind == "ball_lattice") {
    detail::only_keys(j, {"kind", "dim", "G", "delta", "balls"}, where);
    std::vector<LatticeBall> balls;
    for (const Json& b : j.at("balls")) {
      detail::only_keys(b, {"index", "center"}, "ball");
      const auto c = detail::doubles(b.at("center"));
      balls.push_back(LatticeBall{b.at("index").get<std::vector<long>>(),
                                  Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()))});
    }
    return RegionSet::ball_lattice(j.at("dim").get<int>(), j.at("G").get<double>(), j.at("delta").get<double>(),
                                   std::move(balls));
  }
  if (kind == "clipped") {
    detail::only_keys(j, {"kind", "plane", "base"}, where);
    return RegionSet::clipped(region_from_json(j.at("base")), hyperplane_from_json(j.at("plane")));
  }
  if (kind == "clipped_orthant") {
    detail::only_keys(j, {"kind", "base"}, where);
    return RegionSet::clipped_orthant(region_from_json(j.at("base")));
  }
  if (kind == "reflected") {
    detail::only_keys(j, {"kind", "plane", "base"}, where);
    return RegionSet::reflected(region_from_json(j.at("base")), hyperplane_from_json(j.at("plane")));
  }
  if (kind == "union") {
    detail::only_keys(j, {"kind", "members"}, where);
    std::vector<RegionSet> m;
    for (const Json& r : j.at("members")) m.push_back(region_from_json(r));
    return RegionSet::union_of(std::move(m));
  }
  if (kind == "abs_pullback") {
    detail::only_keys(j, {"kind", "base"}, where);
    return RegionSet::abs_pullback(region_from_json(j.at("base")));
  }
  throw InvalidArgument("unknown region kind '" + kind + "'");
}

inline Json thickness_params_json(const ThicknessParams& p) {
  return Json{{"gamma", p.gamma}, {"a", vector_json(p.a)}, {"provenance", p.provenance}};
}

inline Json equidist_params_json(const EquidistParams& p) {
  return Json{{"G", p.G}, {"delta", p.delta}, {"provenance", p.provenance}};
}

inline Json thickness_report_json(const ThicknessReport& r) {
  return Json{{"gamma_estimate", r.gamma_estimate},
              {"a", vector_json(r.a)},
              {"window", Json{{"lo", vector_json(r.window.lo)}, {"hi", vector_json(r.window.hi)}}},
              {"resolution", r.resolution},
              {"offsets_per_axis", r.offsets_per_axis},
              {"periodic_window", r.periodic_window},
              {"exact_measure", r.exact_measure},
              {"min_position", vector_json(r.min_position)},
              {"note", r.note}};
}

//---------------------------------------------------------------------------//
// Cost bounds
//---------------------------------------------------------------------------//

inline Json bound_json(const BoundResult& b) {
  Json inputs = Json::object();
  for (const auto& [k, v] : b.inputs) inputs[k] = number_json(v);
  return Json{{"formula_tag", b.formula_tag},
              {"inputs", inputs},
              {"log_value", number_json(b.log_value)},
              {"value_or_inf", number_json(b.overflow ? std::numeric_limits<double>::infinity() : b.value)}};
}

/// Columns: formula_tag, every input name in first-seen order, log_value, value_or_inf.
inline std::string bounds_csv(std::span<const BoundResult> rows) {
  std::vector<std::string> names;
  for (const auto& r : rows)
    for (const auto& [k, v] : r.inputs) {
      (void)v;
      if (std::find(names.begin(), names.end(), k) == names.end()) names.push_back(k);
    }
  std::ostringstream os;
  os << "formula_tag";
  for (const auto& n : names) os << ',' << csv_field(n);
  os << ",log_value,value_or_inf\n";
  for (const auto& r : rows) {
    os << csv_field(r.formula_tag);
    for (const auto& n : names) {
      os << ',';
      for (const auto& [k, v] : r.inputs)
        if (k == n) {
          os << format_number(v);
          break;
        }
    }
    os << ',' << format_number(r.log_value) << ','
       << format_number(r.overflow ? std::numeric_limits<double>::infinity() : r.value) << '\n';
  }
  return os.str();
}

//---------------------------------------------------------------------------//
// Grids and systems
//---------------------------------------------------------------------------//

inline Json grid_json(const GridDomain& g) {
  return Json{{"shape", to_string(g.shape())},
              {"dimension", g.dimension()},
              {"L", g.length()},
              {"h", g.h()},
              {"origin", std::vector<double>(g.origin().begin(), g.origin().begin() + g.dimension())},
              {"extent", std::vector<int>(g.extent().begin(), g.extent().begin() + g.dimension())},
              {"cells", g.size()}};
}

/// Header for a system dump; omega is listed by cell number.
inline Json system_header_json(const DiscreteSystem& s) {
  Json j = grid_json(s.grid);
  j["bc"] = to_string(s.bc);
  std::vector<std::size_t> omega;
  for (std::size_t c = 0; c < s.control.size(); ++c)
    if (s.control[c]) omega.push_back(c);
  j["omega"] = omega;
  j["nnz"] = s.H.nonZeros();
  return j;
}

/// row,col,value triplets sorted by (row, col); explicit zeros are kept.
inline std::string triplets_csv(const SparseMatrix& m) {
  std::vector<std::tuple<Eigen::Index, Eigen::Index, double>> t;
  t.reserve(static_cast<std::size_t>(m.nonZeros()));
  for (int k = 0; k < m.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
  std::sort(t.begin(), t.end(), [](const auto& x, const auto& y) {
    return std::tie(std::get<0>(x), std::get<1>(x)) < std::tie(std::get<0>(y), std::get<1>(y));
  });
  std::ostringstream os;
  os << "row,col,value\n";
  for (const auto& [r, c, v] : t) os << r << ',' << c << ',' << format_number(v) << '\n';
  return os.str();
}

//---------------------------------------------------------------------------//
// Transfer and control
//---------------------------------------------------------------------------//

inline Json defect_json(const DefectReport& d) {
  return Json{{"relation", d.relation},
              {"defect", number_json(d.defect)},
              {"threshold", number_json(d.threshold)},
              {"pass", d.pass}};
}

inline std::string defects_csv(std::span<const DefectReport> ds) {
  std::ostringstream os;
  os << "relation,defect,threshold,pass\n";
  for (const auto& d : ds)
    os << csv_field(d.relation) << ',' << format_number(d.defect) << ',' << format_number(d.threshold) << ','
       << (d.pass ? "true" : "false") << '\n';
  return os.str();
}

inline Json transfer_datum_json(const TransferDatum& d) {
  return Json{{"index", d.index},
              {"u0_norm", number_json(d.u0_norm)},
              {"half_cost", number_json(d.half_cost)},
              {"full_cost", number_json(d.full_cost)},
              {"cost_margin", number_json(d.cost_margin)},
              {"half_residual", number_json(d.half_residual)},
              {"full_residual", number_json(d.full_residual)},
              {"residual_bound", number_json(d.residual_bound)},
              {"residual_margin", number_json(d.residual_margin)},
              {"direct_half_cost", number_json(d.direct_half_cost)},
              {"direct_half_residual", number_json(d.direct_half_residual)},
              {"pass", d.pass}};
}

inline Json transfer_report_json(const TransferReport& r, const Json& config_echo = Json::object()) {
  Json data = Json::array();
  for (const auto& d : r.data) data.push_back(transfer_datum_json(d));
  return Json{{"T", r.T},
              {"quadrature", Json{{"rule", to_string(r.quadrature.rule)}, {"nodes", r.quadrature.nodes}}},
              {"generator_defect", number_json(r.generator_defect)},
              {"generator_threshold", number_json(r.generator_threshold)},
              {"control_commutation", r.control_commutation},
              {"epsilon_full", number_json(r.epsilon_full)},
              {"epsilon_half", number_json(r.epsilon_half)},
              {"gramian_condition_full", number_json(r.gramian_condition_full)},
              {"gramian_condition_half", number_json(r.gramian_condition_half)},
              {"sampled_cost_half", number_json(r.sampled_cost_half)},
              {"sampled_cost_full", number_json(r.sampled_cost_full)},
              {"min_cost_margin", number_json(r.data.empty() ? 0.0 : r.min_cost_margin())},
              {"all_pass", r.all_pass()},
              {"data", data},
              {"config", config_echo}};
}

inline std::string transfer_csv(const TransferReport& r) {
  std::ostringstream os;
  os << "index,u0_norm,half_cost,full_cost,cost_margin,half_residual,full_residual,residual_bound,"
        "residual_margin,direct_half_cost,pass\n";
  for (const auto& d : r.data)
    os << d.index << ',' << format_number(d.u0_norm) << ',' << format_number(d.half_cost) << ','
       << format_number(d.full_cost) << ',' << format_number(d.cost_margin) << ','
       << format_number(d.half_residual) << ',' << format_number(d.full_residual) << ','
       << format_number(d.residual_bound) << ',' << format_number(d.residual_margin) << ','
       << format_number(d.direct_half_cost) << ',' << (d.pass ? "true" : "false") << '\n';
  return os.str();
}

/// One row per quadrature node: t, v_0, ..., v_{k-1}.
inline std::string trajectory_csv(const Eigen::VectorXd& times, const Eigen::MatrixXd& v) {
  if (v.cols() != times.size()) throw InvalidArgument("trajectory and time grid disagree");
  std::ostringstream os;
  os << 't';
  for (Eigen::Index i = 0; i < v.rows(); ++i) os << ",v" << i;
  os << '\n';
  for (Eigen::Index k = 0; k < v.cols(); ++k) {
    os << format_number(times[k]);
    for (Eigen::Index i = 0; i < v.rows(); ++i) os << ',' << format_number(v(i, k));
    os << '\n';
  }
  return os.str();
}

//---------------------------------------------------------------------------//
// Plot data
//---------------------------------------------------------------------------//

struct PlotPoint {
  double x = 0.0;
  std::string series;
  double y = 0.0;
};

/// Long format x,series,y in the given order. Empty input gives the header only.
inline std::string plot_csv(std::span<const PlotPoint> pts) {
  std::ostringstream os;
  os << "x,series,y\n";
  for (const auto& p : pts) os << format_number(p.x) << ',' << csv_field(p.series) << ',' << format_number(p.y) << '\n';
  return os.str();
}

}  // namespace reflect
