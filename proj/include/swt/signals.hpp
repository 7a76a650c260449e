#ifndef SWT_SIGNALS_HPP
#define SWT_SIGNALS_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "swt/error.hpp"
#include "swt/expr.hpp"

namespace swt {

using cplx = std::complex<double>;

inline constexpr double two_pi = 2.0 * std::numbers::pi;

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline std::size_t next_power_of_two(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// Uniform periodic grid x_j = x_min + j*dx, j < n, dx = (x_max - x_min)/n.
struct Axis {
    double min = 0.0;
    double max = 1.0;
    std::size_t n = 1;

    double step() const { return (max - min) / static_cast<double>(n); }
    double at(std::size_t j) const { return min + static_cast<double>(j) * step(); }
    double length() const { return max - min; }

    friend bool operator==(const Axis&, const Axis&) = default;
};

// Samples of an epsilon-oscillatory wavefunction on a periodic grid.
class WavefunctionGrid {
public:
    WavefunctionGrid() = default;

    // k_eff is the largest local wavenumber the samples must resolve; pass 0
    // to skip the resolution check. At least `points_per_wavelength` samples
    // must fall on the shortest wavelength epsilon/k_eff.
    WavefunctionGrid(Axis axis, std::vector<cplx> values, double epsilon, double k_eff = 0.0,
                     double points_per_wavelength = 2.0)
        : axis_(axis), values_(std::move(values)), epsilon_(epsilon), k_eff_(k_eff) {
        if (!is_power_of_two(axis_.n)) throw input_error("n_x must be a power of two, got " + std::to_string(axis_.n));
        if (values_.size() != axis_.n) throw input_error("sample count does not match n_x");
        if (!(axis_.max > axis_.min)) throw input_error("x_max must exceed x_min");
        if (!(epsilon_ > 0.0)) throw input_error("epsilon must be positive");
        if (k_eff_ > 0.0 && axis_.step() > epsilon_ / (points_per_wavelength * k_eff_)) {
            throw input_error("grid under-resolves the signal: dx=" + detail::format_double(axis_.step()) +
                              " exceeds epsilon/(" + detail::format_double(points_per_wavelength) +
                              "*k_eff)=" + detail::format_double(epsilon_ / (points_per_wavelength * k_eff_)) +
                              "; increase n_x");
        }
    }

    const Axis& axis() const { return axis_; }
    std::size_t size() const { return values_.size(); }
    double epsilon() const { return epsilon_; }
    double k_eff() const { return k_eff_; }
    double dx() const { return axis_.step(); }
    double x(std::size_t j) const { return axis_.at(j); }

    const std::vector<cplx>& values() const { return values_; }
    std::vector<cplx>& values() { return values_; }
    const cplx& operator[](std::size_t j) const { return values_[j]; }
    cplx& operator[](std::size_t j) { return values_[j]; }

    // Discrete L2 norm squared, sum |u_j|^2 dx.
    double norm2() const {
        double s = 0.0;
        for (const auto& v : values_) s += std::norm(v);
        return s * dx();
    }

private:
    Axis axis_;
    std::vector<cplx> values_;
    double epsilon_ = 1.0;
    double k_eff_ = 0.0;
};

// u(x) = A(x) exp(2 pi i S(x) / epsilon)
struct WkbRecipe {
    Expr amplitude;
    Expr phase;
};

// exp(-(alpha/eps + alpha0) x^2 + beta x + gamma). alpha0 carries the part
// of the quadratic coefficient that does not scale with 1/eps, so a term is
// exact at every epsilon.
struct GaussianTerm {
    cplx alpha;
    cplx beta{};
    cplx gamma{};
    cplx alpha0{};

    cplx quadratic(double eps) const { return alpha / eps + alpha0; }
    cplx operator()(double x, double eps) const { return std::exp(-quadratic(eps) * x * x + beta * x + gamma); }
    // Local wavenumber of the term: (eps/2pi) d/dx Im(exponent).
    double wavenumber(double x, double eps) const {
        return eps / two_pi * (-2.0 * quadratic(eps).imag() * x + beta.imag());
    }
};

struct GaussianSum {
    std::vector<GaussianTerm> terms;
};

using InitialCondition = std::variant<WkbRecipe, GaussianSum>;

struct ZeroPotential {};
struct LinearPotential {
    double slope = 1.0;  // V(x) = slope * x
};
struct QuadraticPotential {
    double curvature = 1.0;  // V(x) = curvature * x^2 / 2
};
struct ExprPotential {
    Expr v;
};

using PotentialSpec = std::variant<ZeroPotential, LinearPotential, QuadraticPotential, ExprPotential>;

inline double potential_value(const PotentialSpec& p, double x) {
    return std::visit(
        [x](const auto& v) -> double {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, ZeroPotential>) return 0.0;
            else if constexpr (std::is_same_v<T, LinearPotential>) return v.slope * x;
            else if constexpr (std::is_same_v<T, QuadraticPotential>) return 0.5 * v.curvature * x * x;
            else return v.v(x);
        },
        p);
}

inline Expr potential_expr(const PotentialSpec& p) {
    return std::visit(
        [](const auto& v) -> Expr {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, ZeroPotential>) return Expr::number(0.0);
            else if constexpr (std::is_same_v<T, LinearPotential>)
                return Expr::binary(Op::mul, Expr::number(v.slope), Expr::variable());
            else if constexpr (std::is_same_v<T, QuadraticPotential>)
                return Expr::binary(Op::div,
                                    Expr::binary(Op::mul, Expr::number(v.curvature),
                                                 Expr::binary(Op::pow, Expr::variable(), Expr::number(2.0))),
                                    Expr::number(2.0));
            else return v.v;
        },
        p);
}

// Recognizes the closed-form potentials so the particle pusher and the
// energy checks can use exact derivatives.
inline PotentialSpec classify_potential(const Expr& v) {
    const Expr dv = v.derivative();
    const double v0 = v(0.0);
    if (!dv.depends_on_x() && v0 == 0.0) {
        const double a = dv(0.0);
        if (a == 0.0) return ZeroPotential{};
        return LinearPotential{a};
    }
    const Expr d2v = dv.derivative();
    if (!d2v.depends_on_x() && v0 == 0.0 && dv(0.0) == 0.0) return QuadraticPotential{d2v(0.0)};
    return ExprPotential{v};
}

struct ProblemSpec {
    std::string id = "custom";
    InitialCondition initial_condition;
    PotentialSpec potential = ZeroPotential{};
    double epsilon = 1.0 / 16.0;
    double t_max = 0.5;
    double x_min = -6.0;
    double x_max = 6.0;
    double k_max = 0.0;  // 0: derive from the recipe
    // Optional run settings carried by problem files.
    std::size_t n_x = 0;
    double sigma_x = 1.0;
    double sigma_k = 1.0;

    Axis axis(std::size_t n) const { return Axis{x_min, x_max, n}; }
};

inline cplx evaluate_initial(const InitialCondition& ic, double x, double eps) {
    if (const auto* w = std::get_if<WkbRecipe>(&ic)) {
        const double a = w->amplitude(x);
        if (a == 0.0) return {0.0, 0.0};
        const double s = w->phase(x);
        return a * std::polar(1.0, two_pi * s / eps);
    }
    cplx sum{};
    for (const auto& t : std::get<GaussianSum>(ic).terms) sum += t(x, eps);
    return sum;
}

// Largest local wavenumber over the region where the signal carries at
// least `rel_amplitude` of its peak modulus, from 10^4 samples of the
// recipe's declared derivative.
inline double max_local_wavenumber(const ProblemSpec& spec, double rel_amplitude = 1e-2, std::size_t samples = 10000) {
    const double eps = spec.epsilon;
    const double h = (spec.x_max - spec.x_min) / static_cast<double>(samples - 1);
    std::vector<double> xs(samples);
    for (std::size_t i = 0; i < samples; ++i) xs[i] = spec.x_min + static_cast<double>(i) * h;

    double k = 0.0;
    if (const auto* w = std::get_if<WkbRecipe>(&spec.initial_condition)) {
        const Expr ds = w->phase.derivative();
        std::vector<double> amp(samples);
        double peak = 0.0;
        for (std::size_t i = 0; i < samples; ++i) {
            amp[i] = std::abs(w->amplitude(xs[i]));
            peak = std::max(peak, amp[i]);
        }
        for (std::size_t i = 0; i < samples; ++i)
            if (peak > 0.0 && amp[i] >= rel_amplitude * peak) k = std::max(k, std::abs(ds(xs[i])));
        return k;
    }
    const auto& terms = std::get<GaussianSum>(spec.initial_condition).terms;
    double peak = 0.0;
    for (double x : xs) peak = std::max(peak, std::abs(evaluate_initial(spec.initial_condition, x, eps)));
    for (const auto& t : terms)
        for (double x : xs)
            if (peak > 0.0 && std::abs(t(x, eps)) >= rel_amplitude * peak) k = std::max(k, std::abs(t.wavenumber(x, eps)));
    return k;
}

// Phase-space wavenumber extent: 1.2x the recipe's largest local wavenumber.
inline double default_k_max(const ProblemSpec& spec) {
    const double k = max_local_wavenumber(spec);
    return k > 0.0 ? 1.2 * k : 1.0;
}

inline double effective_k_max(const ProblemSpec& spec) { return spec.k_max > 0.0 ? spec.k_max : default_k_max(spec); }

inline WavefunctionGrid sample_problem(const ProblemSpec& spec, std::size_t n_x, double points_per_wavelength = 2.0) {
    if (!is_power_of_two(n_x)) throw input_error("n_x must be a power of two, got " + std::to_string(n_x));
    const Axis ax = spec.axis(n_x);
    std::vector<cplx> v(n_x);
    for (std::size_t j = 0; j < n_x; ++j) v[j] = evaluate_initial(spec.initial_condition, ax.at(j), spec.epsilon);
    return WavefunctionGrid(ax, std::move(v), spec.epsilon, max_local_wavenumber(spec), points_per_wavelength);
}

// ---------------------------------------------------------------------------
// Built-in problems

inline const std::vector<std::string>& builtin_problem_ids() {
    static const std::vector<std::string> ids{"problem1", "problem2", "problem3", "problem4", "tanh_chirp"};
    return ids;
}

inline std::string builtin_problem_formula(std::string_view id) {
    if (id == "problem1")
        return "u0 = A(x) exp(2 pi i S(x)/eps), A(x) = 1/4 (tanh(6.87(x+2.42))+1)(tanh(6.87(2.42-x))+1), "
               "S(x) = -x^4/4 - x^2 + 2x; V(x) = 0";
    if (id == "problem2") return "u0 = A(x) exp(2 pi i S(x)/eps), A(x) as problem1, S(x) = -x^4/4 + 2x; V(x) = x";
    if (id == "problem3")
        return "u0 = exp(-(1+7i) x^2/(10 eps)) + exp(-(0.2+3i) x^2/(10 eps)) + exp(-(0.9-8i) x^2/(10 eps)); V(x) = x";
    if (id == "problem4")
        return "u0 = exp(-(1+3i/eps) x^2 - 2x - 4) + exp(-(1+2i/eps) x^2 - x - 1) + "
               "exp(-(1+i/eps) x^2 - 2x/3 - 4/9); V(x) = 0";
    if (id == "tanh_chirp")
        return "u0 = A(x) exp(2 pi i S(x)/eps), A(x) = exp(-25(x-0.5)^2), "
               "S(x) = -1/5 log(exp(10(x-0.5)) + exp(-10(x-0.5))); V(x) = 0";
    throw input_error("unknown problem id '" + std::string(id) + "'");
}

inline ProblemSpec builtin_problem(std::string_view id, double epsilon) {
    if (!(epsilon > 0.0)) throw input_error("epsilon must be positive");
    const char* bump = "1/4*(tanh(6.87*(x+2.42))+1)*(tanh(6.87*(2.42-x))+1)";
    ProblemSpec p;
    p.id = std::string(id);
    p.epsilon = epsilon;
    if (id == "problem1") {
        p.initial_condition = WkbRecipe{parse_expression(bump), parse_expression("-x^4/4-x^2+2*x")};
        p.potential = ZeroPotential{};
        p.t_max = 0.05;
    } else if (id == "problem2") {
        p.initial_condition = WkbRecipe{parse_expression(bump), parse_expression("-x^4/4+2*x")};
        p.potential = LinearPotential{1.0};
        p.t_max = 0.05;
    } else if (id == "problem3") {
        p.initial_condition = GaussianSum{{
            GaussianTerm{cplx(1.0, 7.0) / 10.0},
            GaussianTerm{cplx(0.2, 3.0) / 10.0},
            GaussianTerm{cplx(0.9, -8.0) / 10.0},
        }};
        p.potential = LinearPotential{1.0};
        p.t_max = 0.1;
        // The widest term decays like exp(-0.02 x^2/eps).
        p.x_min = -10.0;
        p.x_max = 10.0;
    } else if (id == "problem4") {
        p.initial_condition = GaussianSum{{
            GaussianTerm{cplx(0.0, 3.0), -2.0, -4.0, 1.0},
            GaussianTerm{cplx(0.0, 2.0), -1.0, -1.0, 1.0},
            GaussianTerm{cplx(0.0, 1.0), -2.0 / 3.0, -4.0 / 9.0, 1.0},
        }};
        p.potential = ZeroPotential{};
        p.t_max = 0.5;
    } else if (id == "tanh_chirp") {
        p.initial_condition = WkbRecipe{parse_expression("exp(-25*(x-0.5)^2)"),
                                        parse_expression("-1/5*log(exp(10*(x-0.5))+exp(-10*(x-0.5)))")};
        p.potential = ZeroPotential{};
        p.t_max = 0.05;
        // The envelope must vanish at the periodic boundary; on [0,1] it is
        // still 2e-3 there.
        p.x_min = -0.5;
        p.x_max = 1.5;
    } else {
        throw input_error("unknown problem id '" + std::string(id) + "'");
    }
    return p;
}

// ---------------------------------------------------------------------------
// Problem files: `key = value` lines grouped under [problem], [grid],
// [smoothing] and [run]. '#' starts a comment.

namespace detail {

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

// Numeric values accept constant expressions, e.g. `epsilon = 1/64`.
inline double parse_constant(std::string_view text, const std::string& key) {
    Expr e = parse_expression(text);
    if (e.depends_on_x()) throw input_error("value of '" + key + "' must not depend on x");
    return e(0.0);
}

// Complex literal: `a`, `bj`, `a+bj`, `a-bj` (whitespace ignored).
inline cplx parse_complex(std::string_view text) {
    std::string s;
    for (char c : text)
        if (!std::isspace(static_cast<unsigned char>(c))) s.push_back(c);
    if (s.empty()) throw parse_error("empty complex literal", 0);
    auto read_real = [&](std::size_t& pos) {
        double v = 0.0;
        std::size_t start = pos;
        if (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) ++pos;
        if (pos < s.size() && (s[pos] == 'j' || s[pos] == 'i')) {
            // bare "j" means 1j
            v = 1.0;
        } else {
            auto res = std::from_chars(s.data() + pos, s.data() + s.size(), v);
            if (res.ec != std::errc{}) throw parse_error("malformed complex literal '" + s + "'", pos);
            pos = static_cast<std::size_t>(res.ptr - s.data());
        }
        return s[start] == '-' ? -v : v;
    };
    std::size_t pos = 0;
    double first = read_real(pos);
    if (pos == s.size()) return {first, 0.0};
    if (s[pos] == 'j' || s[pos] == 'i') {
        ++pos;
        if (pos != s.size()) throw parse_error("trailing characters in complex literal '" + s + "'", pos);
        return {0.0, first};
    }
    double second = read_real(pos);
    if (pos >= s.size() || (s[pos] != 'j' && s[pos] != 'i') || pos + 1 != s.size())
        throw parse_error("expected imaginary part ending in 'j' in '" + s + "'", pos);
    return {first, second};
}

inline std::vector<GaussianTerm> parse_terms(std::string_view text) {
    std::vector<GaussianTerm> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find(';', start);
        if (end == std::string_view::npos) end = text.size();
        std::string triple = trim(text.substr(start, end - start));
        if (!triple.empty()) {
            std::vector<cplx> parts;
            std::size_t p = 0;
            while (p <= triple.size()) {
                std::size_t q = triple.find(',', p);
                if (q == std::string::npos) q = triple.size();
                parts.push_back(parse_complex(std::string_view(triple).substr(p, q - p)));
                p = q + 1;
            }
            if (parts.size() != 3 && parts.size() != 4)
                throw input_error("each term needs alpha,beta,gamma[,alpha0]; got '" + triple + "'");
            if (!(parts[0].real() > 0.0) && !(parts[0].real() == 0.0 && parts.size() == 4 && parts[3].real() > 0.0))
                throw input_error("term must decay: alpha (or alpha0 when alpha is imaginary) needs a positive real part");
            out.push_back(GaussianTerm{parts[0], parts[1], parts[2], parts.size() == 4 ? parts[3] : cplx{}});
        }
        start = end + 1;
    }
    return out;
}

} // namespace detail

inline ProblemSpec parse_problem_config(std::string_view text) {
    static const std::map<std::string, std::string, std::less<>> section_of{
        {"ic_type", "problem"}, {"A", "problem"},     {"S", "problem"},        {"terms", "problem"},
        {"V", "problem"},       {"epsilon", "run"},   {"t_max", "run"},        {"x_min", "grid"},
        {"x_max", "grid"},      {"k_max", "grid"},    {"n_x", "grid"},         {"sigma_x", "smoothing"},
        {"sigma_k", "smoothing"}};

    std::map<std::string, std::string> kv;
    std::string section;
    std::size_t line_start = 0;
    std::size_t line_no = 0;
    while (line_start < text.size()) {
        std::size_t nl = text.find('\n', line_start);
        if (nl == std::string_view::npos) nl = text.size();
        ++line_no;
        std::string_view raw = text.substr(line_start, nl - line_start);
        if (auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
        std::string line = detail::trim(raw);
        const std::size_t offset = line_start;
        line_start = nl + 1;
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw parse_error("unterminated section header on line " + std::to_string(line_no), offset);
            section = detail::trim(std::string_view(line).substr(1, line.size() - 2));
            if (section != "problem" && section != "grid" && section != "smoothing" && section != "run")
                throw input_error("unknown section [" + section + "] on line " + std::to_string(line_no));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw parse_error("expected 'key = value' on line " + std::to_string(line_no), offset);
        std::string key = detail::trim(std::string_view(line).substr(0, eq));
        std::string value = detail::trim(std::string_view(line).substr(eq + 1));
        auto it = section_of.find(key);
        if (it == section_of.end()) throw input_error("unknown key '" + key + "' on line " + std::to_string(line_no));
        if (section.empty()) throw input_error("key '" + key + "' appears before any section header");
        if (it->second != section)
            throw input_error("key '" + key + "' belongs in [" + it->second + "], found in [" + section + "]");
        if (kv.count(key)) throw input_error("duplicate key '" + key + "'");
        kv[key] = value;
    }

    ProblemSpec p;
    p.id = "config";
    auto num = [&](const char* key, double& out) {
        if (auto it = kv.find(key); it != kv.end()) out = detail::parse_constant(it->second, key);
    };
    num("epsilon", p.epsilon);
    num("t_max", p.t_max);
    num("x_min", p.x_min);
    num("x_max", p.x_max);
    num("k_max", p.k_max);
    num("sigma_x", p.sigma_x);
    num("sigma_k", p.sigma_k);
    if (auto it = kv.find("n_x"); it != kv.end()) {
        double n = detail::parse_constant(it->second, "n_x");
        if (!(n >= 1.0) || n != std::floor(n)) throw input_error("n_x must be a positive integer");
        p.n_x = static_cast<std::size_t>(n);
    }
    if (!(p.epsilon > 0.0)) throw input_error("epsilon must be positive");
    if (!(p.t_max >= 0.0)) throw input_error("t_max must be non-negative");
    if (!(p.x_max > p.x_min)) throw input_error("x_max must exceed x_min");

    const std::string ic = kv.count("ic_type") ? kv["ic_type"] : "";
    if (ic == "wkb") {
        if (!kv.count("A") || !kv.count("S")) throw input_error("ic_type = wkb needs A and S");
        if (kv.count("terms")) throw input_error("'terms' is only valid with ic_type = gaussian_sum");
        p.initial_condition = WkbRecipe{parse_expression(kv["A"]), parse_expression(kv["S"])};
    } else if (ic == "gaussian_sum") {
        if (!kv.count("terms")) throw input_error("ic_type = gaussian_sum needs terms");
        if (kv.count("A") || kv.count("S")) throw input_error("A and S are only valid with ic_type = wkb");
        auto terms = detail::parse_terms(kv["terms"]);
        if (terms.empty()) throw input_error("terms is empty");
        p.initial_condition = GaussianSum{std::move(terms)};
    } else {
        throw input_error("ic_type must be 'wkb' or 'gaussian_sum'");
    }
    p.potential = kv.count("V") ? classify_potential(parse_expression(kv["V"])) : PotentialSpec{ZeroPotential{}};
    return p;
}

inline ProblemSpec load_problem_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_problem_config(ss.str());
}

// Renders a spec as a problem file.
inline std::string format_problem_config(const ProblemSpec& p) {
    auto c = [](cplx z) {
        std::string s = detail::format_double(z.real());
        if (z.imag() != 0.0) s += (z.imag() < 0.0 ? "" : "+") + detail::format_double(z.imag()) + "j";
        return s;
    };
    std::ostringstream os;
    os << "[problem]\n";
    if (const auto* w = std::get_if<WkbRecipe>(&p.initial_condition)) {
        os << "ic_type = wkb\nA = " << w->amplitude.str() << "\nS = " << w->phase.str() << "\n";
    } else {
        os << "ic_type = gaussian_sum\nterms = ";
        const auto& terms = std::get<GaussianSum>(p.initial_condition).terms;
        for (std::size_t i = 0; i < terms.size(); ++i) {
            const auto& t = terms[i];
            os << (i ? "; " : "") << c(t.alpha) << "," << c(t.beta) << "," << c(t.gamma);
            if (t.alpha0 != cplx{}) os << "," << c(t.alpha0);
        }
        os << "\n";
    }
    os << "V = " << potential_expr(p.potential).str() << "\n";
    os << "[run]\nepsilon = " << detail::format_double(p.epsilon) << "\nt_max = " << detail::format_double(p.t_max) << "\n";
    os << "[grid]\nx_min = " << detail::format_double(p.x_min) << "\nx_max = " << detail::format_double(p.x_max) << "\n";
    if (p.k_max > 0.0) os << "k_max = " << detail::format_double(p.k_max) << "\n";
    if (p.n_x > 0) os << "n_x = " << p.n_x << "\n";
    os << "[smoothing]\nsigma_x = " << detail::format_double(p.sigma_x)
       << "\nsigma_k = " << detail::format_double(p.sigma_k) << "\n";
    return os.str();
}

} // namespace swt

#endif
