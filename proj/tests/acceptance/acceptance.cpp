// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_dec_float.hpp>

#include "reflect/reflect.hpp"

namespace {

using namespace reflect;
using Big = boost::multiprecision::cpp_dec_float_50;
namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

//---------------------------------------------------------------------------//
// 1. Parameter transforms
//---------------------------------------------------------------------------//

Outcome parameter_transforms() {
  bool ok = true;
  double worst_sqrt = 0.0;
  const std::vector<std::pair<double, std::vector<double>>> cases{
      {0.25, {1.0, 1.0}}, {0.5, {0.5, 2.0}}, {0.125, {3.0, 1.5, 0.75}}, {1.0, {0.2, 0.3}}};
  for (const auto& [g, a] : cases) {
    const RegionSet s = RegionSet::full_space(static_cast<int>(a.size()));
    const ThicknessParams p(g, a);

    const auto h = symmetrize_halfspace(s, p).params;
    ok &= h.gamma == g / 2 && h.a[0] == 2 * a[0];
    for (std::size_t j = 1; j < a.size(); ++j) ok &= h.a[j] == a[j];

    const auto o = symmetrize_orthant(s, p).params;
    ok &= o.gamma == g / std::pow(2.0, static_cast<double>(a.size()));
    for (std::size_t j = 0; j < a.size(); ++j) ok &= o.a[j] == 2 * a[j];

    const auto sc = symmetrize_sector(s, p, std::numbers::pi / 8).params;
    const Big a1(a[0]), a2(a[1]);
    const Big r2 = a1 * a1 + a2 * a2;
    const Big gamma_exact = Big(g) * a1 * a2 / (4 * r2);
    const Big side_exact = 2 * sqrt(r2);
    // gamma is rational in the inputs; one rounding of the final quotient is all that is allowed.
    const double gamma_rounded = static_cast<double>(gamma_exact);
    ok &= sc.gamma == gamma_rounded;
    for (int j = 0; j < 2; ++j) {
      const double err = static_cast<double>(abs((Big(sc.a[static_cast<std::size_t>(j)]) - side_exact) / side_exact));
      worst_sqrt = std::max(worst_sqrt, err);
    }
    for (std::size_t j = 2; j < a.size(); ++j) ok &= sc.a[j] == a[j];
  }
  ok &= worst_sqrt <= 1e-15;
  return {ok, "rationals exact, sqrt rel err " + fmt(worst_sqrt)};
}

//---------------------------------------------------------------------------//
// 2. Thickness certification
//---------------------------------------------------------------------------//

Outcome thickness_certification() {
  const int r = 200;
  const double tol = 2.0 / r;
  const RegionSet slabs = periodic_slabs(2, 1.0, 0.0, 0.25);
  const std::vector<double> a{1.0, 1.0};
  const ThicknessReport base = certify_thickness(slabs, a, std::nullopt, r);
  const SymmetrizedSet sym = symmetrize_halfspace(slabs, ThicknessParams(0.25, a));
  const Window w{{-2.0, 0.0}, {2.0, 1.0}};
  const ThicknessReport rep = certify_thickness(sym.set, sym.params.a, w, r);
  const bool ok = std::abs(base.gamma_estimate - 0.25) <= tol && sym.params.gamma == 0.125 &&
                  sym.params.a == std::vector<double>{2.0, 1.0} && rep.gamma_estimate >= 0.125 - tol;
  return {ok, "gamma " + fmt(base.gamma_estimate) + ", symmetrized " + fmt(rep.gamma_estimate) + " vs 0.125"};
}

//---------------------------------------------------------------------------//
// 3. Equidistributed transforms
//---------------------------------------------------------------------------//

Outcome equidistributed_transforms() {
  bool ok = true;
  for (double G : {0.5, 1.0, 3.0})
    for (double delta : {0.01, 0.1, 0.2}) {
      const EquidistParams p(G, delta);
      const auto s8 = symmetrize_equidistributed(p, std::numbers::pi / 8);
      const auto s4 = symmetrize_equidistributed(p, std::numbers::pi / 4);
      ok &= s8.G == 4 * G && s8.delta == delta && s4.G == 2 * G && s4.delta == delta;
    }
  return {ok, "pi/8 -> 4G, pi/4 -> 2G"};
}

//---------------------------------------------------------------------------//
// 4. Bound formulas against 50-digit evaluation
//---------------------------------------------------------------------------//

Big thick_oracle(Big g, const std::vector<Big>& a, Big T, int d, Big K) {
  Big s = 0;
  for (const Big& x : a) s += x;
  const Big L = log(pow(K, d) / g);
  return -log(T) / 2 + K * d / 2 * L + K * s * s * L * L / (2 * T);
}

Big equidist_oracle(Big G, Big delta, Big T, Big vs, Big vn, Big D) {
  const Big r = log(delta / G);
  return -D * (1 + pow(G, Big(4) / 3) * pow(vs, Big(2) / 3)) * r + log(D) - log(T) / 2 + D * G * G * r * r / (2 * T) +
         vn * T;
}

struct Sampler {
  std::mt19937_64 rng{20240611};
  double uniform(double lo, double hi) { return lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53; }
  double log_uniform(double lo, double hi) { return std::exp(uniform(std::log(lo), std::log(hi))); }
};

double rel(double x, const Big& y) { return static_cast<double>(abs((Big(x) - y) / y)); }

Outcome bound_fidelity() {
  Sampler S;
  double worst = 0.0;
  std::string worst_tag;
  const auto track = [&](const std::string& tag, double got, const Big& want) {
    const double e = rel(got, want);
    if (e > worst || std::isnan(e)) {
      worst = std::isnan(e) ? INFINITY : e;
      worst_tag = tag;
    }
  };
  const int points = 100;
  // T <= 1 keeps every term of the log-bound non-negative, so relative error in log_value is meaningful.
  for (int i = 0; i < points; ++i) {
    UniversalConstants c;
    c.K = S.uniform(1.0, 3.0);
    const double K = c.K;
    const double g = S.uniform(0.01, 0.9);
    const double T = S.log_uniform(1e-2, 1.0);
    const int d = 1 + i % 3;
    std::vector<double> a(static_cast<std::size_t>(d));
    std::vector<Big> ab;
    for (auto& x : a) {
      x = S.uniform(0.1, 2.0);
      ab.emplace_back(x);
    }
    track("thick", cost_bound_thick(g, a, T, d, c).log_value, thick_oracle(g, ab, T, d, K));

    // Half-space: thick at (gamma/2, (2 a_1, a_2, ...)).
    std::vector<Big> ah = ab;
    ah[0] *= 2;
    track("halfspace", cost_bound_domain({DomainKind::halfspace}, g, a, T, c).log_value,
          thick_oracle(Big(g) / 2, ah, T, d, K));

    // Orthant: thick at (gamma/2^d, 2a).
    std::vector<Big> ao = ab;
    for (auto& x : ao) x *= 2;
    track("orthant", cost_bound_domain({DomainKind::orthant}, g, a, T, c).log_value,
          thick_oracle(Big(g) / pow(Big(2), d), ao, T, d, K));

    const double theta = S.uniform(0.55, 2.0);
    {
      Big s = 0;
      for (const Big& x : ab) s += x;
      const Big L = log(pow(Big(K), d) / Big(g));
      const Big th(theta);
      const Big p = 2 * th / (2 * th - 1);
      const Big q = 1 / (2 * th - 1);
      const Big o = -log(Big(T)) / 2 + Big(K) * d / 2 * L + Big(K) * pow(s * L, p) / (2 * pow(Big(T), q));
      track("fractional", cost_bound_fractional(g, a, T, d, theta, c).log_value, o);
    }

    // Planar and prism cases use the sector parameters gamma a1 a2 / (4 r^2), 2r.
    std::vector<double> a2{a[0], S.uniform(0.1, 2.0)};
    const Big r2 = Big(a2[0]) * Big(a2[0]) + Big(a2[1]) * Big(a2[1]);
    const Big gs = Big(g) * Big(a2[0]) * Big(a2[1]) / (4 * r2);
    const Big side = 2 * sqrt(r2);
    const int n = 2 + i % 4;
    {
      const Big f = pow(Big(2), 3 * n - 4);
      const Big L = log(f * Big(K) * Big(K) / gs);
      const Big at = 2 * side;
      const Big o = -log(Big(T)) / 2 + Big(K) * L + f * Big(K) * at * at * L * L / (2 * Big(T));
      track("sector", cost_bound_domain({DomainKind::sector, n}, g, a2, T, c).log_value, o);
    }
    track("triangle", cost_bound_domain({DomainKind::triangle}, g, a2, T, c).log_value,
          thick_oracle(gs, {side, side}, T, 2, K));
    const std::vector<double> a3{a2[0], a2[1], S.uniform(0.1, 2.0)};
    track("prism", cost_bound_domain({DomainKind::prism}, g, a3, T, c).log_value,
          thick_oracle(gs, {side, side, Big(a3[2])}, T, 3, K));

    c.D[2] = S.uniform(1.0, 3.0);
    c.D[3] = S.uniform(1.0, 3.0);
    const double G = S.uniform(0.5, 3.0);
    const double delta = S.uniform(0.01, 0.49) * G;
    const double vs = S.uniform(0.0, 3.0);
    const PotentialNorms v{vs, S.uniform(0.0, vs)};
    track("equidistributed", cost_bound_equidistributed(G, delta, T, v, 2, c).log_value,
          equidist_oracle(G, delta, T, v.sup_norm, v.neg_sup_norm, c.D[2]));
    track("equidistributed_sector",
          cost_bound_equidistributed_domain({DomainKind::sector, n}, G, delta, T, v, c).log_value,
          equidist_oracle(pow(Big(4), n - 1) * Big(G), delta, T, v.sup_norm, v.neg_sup_norm, c.D[2]));
    track("equidistributed_triangle",
          cost_bound_equidistributed_domain({DomainKind::triangle}, G, delta, T, v, c).log_value,
          equidist_oracle(2 * Big(G), delta, T, v.sup_norm, v.neg_sup_norm, std::max(c.D[2], c.D[3])));
  }

  // sector(n=2) equals the orthant bound at the sector parameters.
  double composed = 0.0;
  for (int i = 0; i < points; ++i) {
    UniversalConstants c;
    c.K = S.uniform(1.0, 3.0);
    const std::vector<double> a{S.uniform(0.1, 2.0), S.uniform(0.1, 2.0)};
    const double g = S.uniform(0.01, 1.0);
    const double T = S.log_uniform(1e-2, 1e2);
    const ThicknessParams sp = sector_params(ThicknessParams(g, a));
    const double s = cost_bound_domain({DomainKind::sector, 2}, g, a, T, c).log_value;
    const double o = cost_bound_domain({DomainKind::orthant}, sp.gamma, sp.a, T, c).log_value;
    composed = std::max(composed, std::abs(s - o) / std::max(std::abs(o), 1e-300));
  }
  const bool ok = worst <= 1e-12 && composed <= 1e-12;
  return {ok, "worst rel err " + fmt(worst) + " (" + worst_tag + "), sector(2) vs orthant " + fmt(composed)};
}

//---------------------------------------------------------------------------//
// 5. Discrete intertwining
//---------------------------------------------------------------------------//

Outcome discrete_intertwining() {
  bool ok = true;
  double worst2d = 0.0;
  for (auto bc : {BoundaryCondition::dirichlet, BoundaryCondition::neumann}) {
    for (int n : {8, 32, 128}) {
      const GridDomain full = make_sym_interval(1.0, n);
      const GridDomain half = half_domain(full);
      const CoefficientField fh = CoefficientField::identity(half, 0.3);
      const auto ops = build_reflection_operators(half, full, bc);
      const SparseMatrix XsX = ops.Xstar * ops.X;
      const Eigen::MatrixXd twoI = 2.0 * Eigen::MatrixXd::Identity(XsX.rows(), XsX.cols());
      ok &= Eigen::MatrixXd(XsX) == twoI;
      const double defect = check_discrete_intertwining(ops, assemble_operator(half, fh, bc).H,
                                                        assemble_operator(full, reflect_coefficients(fh, half, full), bc).H);
      ok &= defect == 0.0;
    }
    Eigen::MatrixXd A(2, 2);
    A << 2, 1, 1, 3;
    for (int n : {8, 16, 32, 64}) {
      const GridDomain full = make_sym_square(1.0, n, 2);
      const GridDomain half = half_domain(full);
      const CoefficientField fh = CoefficientField::constant(half, A);
      const auto ops = build_reflection_operators(half, full, bc);
      const SparseMatrix XsX = ops.Xstar * ops.X;
      ok &= Eigen::MatrixXd(XsX) == 2.0 * Eigen::MatrixXd::Identity(XsX.rows(), XsX.cols());
      const SparseMatrix Hf = assemble_operator(full, reflect_coefficients(fh, half, full), bc).H;
      const double defect = check_discrete_intertwining(ops, assemble_operator(half, fh, bc).H, Hf);
      worst2d = std::max(worst2d, defect / max_abs(Hf));
    }
  }
  ok &= worst2d <= 1e-12;
  return {ok, "1D defect 0, 2D relative defect " + fmt(worst2d)};
}

//---------------------------------------------------------------------------//
// 6. Semigroup and spectral intertwining
//---------------------------------------------------------------------------//

Outcome semigroup_spectral() {
  const GridDomain full = make_sym_interval(1.0, 64);
  const GridDomain half = half_domain(full);
  std::vector<char> wh(half.size(), 0);
  for (std::size_t c = 0; c < half.size(); ++c) wh[c] = half.center(c)[0] > 0.25 && half.center(c)[0] < 0.5;
  const CoefficientField fh = CoefficientField::identity(half);
  const auto bc = BoundaryCondition::dirichlet;
  const auto small = AbstractSystem::from_discrete(assemble_operator(half, fh, bc, wh));
  const auto big = AbstractSystem::from_discrete(
      assemble_operator(full, reflect_coefficients(fh, half, full), bc, mirror_control(wh, half, full)));
  const auto t = IntertwinerTriple::from_reflection(build_reflection_operators(half, full, bc));
  const std::vector<double> times{0.01, 0.1, 1.0};
  const auto semi = check_semigroup_commutation(t, big, small, times);
  const auto spec = spectral_intertwining(t, big, small, fractional_power(0.75), {});
  const bool ok = semi.defect <= 1e-10 && spec.function.defect <= 1e-10;
  return {ok, "semigroup " + fmt(semi.defect) + ", s^0.75 " + fmt(spec.function.defect)};
}

//---------------------------------------------------------------------------//
// 7. Scalar HUM oracle
//---------------------------------------------------------------------------//

Outcome scalar_hum() {
  // Lambda = int_0^1 e^{-2(1-s)} ds = (1 - e^{-2})/2, p = -e^{-1}/Lambda, ||v||^2 = p^2 Lambda.
  const Big e = exp(Big(1));
  const Big lambda = (1 - 1 / (e * e)) / 2;
  const Big oracle = sqrt(Big(2) / (1 - 1 / (e * e))) / e;
  const Big via_gramian = (1 / e) / sqrt(lambda);
  if (abs(oracle - via_gramian) > Big(1e-40)) return {false, "oracle forms disagree"};
  const AbstractSystem sys(Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Ones(1, 1));
  const ControlSolve s = hum_control({sys, 1.0, Eigen::VectorXd::Ones(1), {32, QuadratureRule::gauss_legendre}, 0.0});
  const double err = std::abs(s.control_norm - static_cast<double>(oracle));
  return {err <= 1e-8, "norm " + fmt(s.control_norm) + ", abs err " + fmt(err)};
}

//---------------------------------------------------------------------------//
// 8. Transfer on the discrete pairs
//---------------------------------------------------------------------------//

struct TransferStats {
  bool ok = true;
  double worst_ratio = 0.0;
  double min_margin = INFINITY;
};

void transfer_case(const GridDomain& full, const Eigen::MatrixXd& A, BoundaryCondition bc, TransferStats& st) {
  const GridDomain half = half_domain(full);
  std::vector<char> wh(half.size(), 0);
  for (std::size_t c = 0; c < half.size(); ++c) wh[c] = half.center(c)[0] > 0.25 && half.center(c)[0] < 0.5;
  const auto wf = mirror_control(wh, half, full);
  std::size_t covered = 0;
  for (char c : wf) covered += c ? 1 : 0;
  if (4 * covered != full.size()) st.ok = false;
  const CoefficientField fh = CoefficientField::constant(half, A);
  const DiscreteSystem sh = assemble_operator(half, fh, bc, wh);
  const DiscreteSystem sf = assemble_operator(full, reflect_coefficients(fh, half, full), bc, wf);
  const auto data = detail::random_unit_data(20, static_cast<Eigen::Index>(half.size()), 20240611);
  const TransferReport rep =
      transfer_experiment(sh, sf, build_reflection_operators(half, full, bc), 0.5, data, {32});
  for (const auto& d : rep.data) {
    st.ok &= d.half_residual <= 10 * d.full_residual;
    st.ok &= d.half_cost <= d.full_cost + 1e-10;
    st.worst_ratio = std::max(st.worst_ratio, d.half_residual / d.full_residual);
    st.min_margin = std::min(st.min_margin, d.full_cost + 1e-10 - d.half_cost);
  }
}

Outcome transfer_pairs() {
  TransferStats st;
  const Eigen::MatrixXd one = Eigen::MatrixXd::Identity(1, 1);
  transfer_case(make_sym_interval(1.0, 128), one, BoundaryCondition::dirichlet, st);
  transfer_case(make_sym_interval(1.0, 128), one, BoundaryCondition::neumann, st);
  Eigen::MatrixXd A(2, 2);
  A << 2, 1, 1, 3;
  transfer_case(make_sym_square(1.0, 32, 2), A, BoundaryCondition::dirichlet, st);
  return {st.ok, "max residual ratio " + fmt(st.worst_ratio) + ", min cost margin " + fmt(st.min_margin)};
}

//---------------------------------------------------------------------------//
// 9. Convergence
//---------------------------------------------------------------------------//

Outcome convergence() {
  bool ok = true;
  double min_order = INFINITY;
  for (int k : {1, 2}) {
    double lam[3];
    for (int level = 0; level < 3; ++level) {
      const GridDomain g = make_interval(1.0, 32 << level);
      const Eigen::MatrixXd H(assemble_operator(g, CoefficientField::identity(g), BoundaryCondition::dirichlet).H);
      lam[level] = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(H, Eigen::EigenvaluesOnly).eigenvalues()[k - 1];
    }
    const double order = std::log2((lam[0] - lam[1]) / (lam[1] - lam[2]));
    const double exact = std::pow(k * std::numbers::pi, 2);
    ok &= std::abs(lam[2] - exact) < std::abs(lam[1] - exact);
    min_order = std::min(min_order, order);
  }
  ok &= min_order >= 1.9;

  const double exact = -std::expm1(-2.0) / 2.0;
  const AbstractSystem sys(Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Ones(1, 1));
  const int m[3] = {8, 16, 32};
  double trap[3], gauss[3];
  for (int i = 0; i < 3; ++i) {
    trap[i] = std::abs(gramian(sys, 1.0, {m[i], QuadratureRule::trapezoid}).value() - exact);
    gauss[i] = std::abs(gramian(sys, 1.0, {m[i], QuadratureRule::gauss_legendre}).value() - exact);
  }
  double trap_order = INFINITY;
  for (int i = 0; i < 2; ++i)
    trap_order = std::min(trap_order, std::log(trap[i] / trap[i + 1]) / std::log((m[i + 1] - 1.0) / (m[i] - 1.0)));
  ok &= trap_order >= 1.9;
  // Spectral: already at rounding level for m = 8.
  for (double e : gauss) ok &= e <= 1e-14;
  return {ok, "eigenvalue order " + fmt(min_order) + ", trapezoid order " + fmt(trap_order) + ", Gauss err " +
                  fmt(std::max({gauss[0], gauss[1], gauss[2]}))};
}

//---------------------------------------------------------------------------//
// 10. CLI determinism
//---------------------------------------------------------------------------//

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome cli_determinism() {
  const fs::path config = fs::path(REFLECT_SOURCE_DIR) / "configs" / "transfer_dirichlet_1d.json";
  const fs::path base = fs::temp_directory_path() / "reflect_acceptance";
  fs::remove_all(base);
  std::string manifests[2];
  for (int run = 0; run < 2; ++run) {
    const fs::path out = base / ("run" + std::to_string(run));
    const std::string cmd = std::string(REFLECT_CLI_PATH) + " --config " + config.string() + " --out " + out.string() +
                            " --threads " + std::to_string(run + 1) + " > /dev/null";
    if (std::system(cmd.c_str()) != 0) return {false, "CLI run " + std::to_string(run) + " failed"};
    manifests[run] = slurp(out / "manifest.json");
  }
  const bool ok = !manifests[0].empty() && manifests[0] == manifests[1];
  return {ok, std::to_string(manifests[0].size()) + "-byte manifests " + (ok ? "identical" : "differ")};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "parameter-transform exactness", 1, parameter_transforms},
      {2, "thickness certification", 10, thickness_certification},
      {3, "equidistributed transforms", 1, equidistributed_transforms},
      {4, "bound-formula fidelity", 30, bound_fidelity},
      {5, "discrete intertwining exactness", 30, discrete_intertwining},
      {6, "semigroup and spectral intertwining", 10, semigroup_spectral},
      {7, "scalar HUM oracle", 1, scalar_hum},
      {8, "transfer on discrete pairs", 300, transfer_pairs},
      {9, "convergence properties", 60, convergence},
      {10, "CLI determinism", 300, cli_determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.budget_s;
    const bool pass = o.pass && in_time;
    failures += pass ? 0 : 1;
    std::printf("%s %2d %s: %s; %.2fs (limit %gs)%s\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs,
                c.budget_s, in_time ? "" : " over budget");
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
