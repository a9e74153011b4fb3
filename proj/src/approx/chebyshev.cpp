#include "spikehe/approx/chebyshev.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "spikehe/common/errors.hpp"

namespace spikehe::approx {

double cheb_recurrence(int n, double x) {
    if (n < 0) throw DomainError("Chebyshev index must be >= 0");
    if (n == 0) return 1.0;
    double t0 = 1.0, t1 = x;
    for (int k = 2; k <= n; ++k) {
        const double t2 = 2.0 * x * t1 - t0;
        t0 = t1;
        t1 = t2;
    }
    return t1;
}

double ChebyshevSeries::eval(double x) const {
    double b1 = 0.0, b2 = 0.0;
    for (int k = static_cast<int>(coeffs.size()) - 1; k >= 1; --k) {
        const double b0 = coeffs[k] + 2.0 * x * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    const double c0 = coeffs.empty() ? 0.0 : coeffs[0];
    return c0 + x * b1 - b2;
}

std::vector<double> chebyshev_project(double (*f)(double, void*), void* user, int degree, int nodes) {
    if (degree < 0 || nodes <= degree) throw ParameterError("projection needs nodes > degree >= 0");
    std::vector<double> fx(nodes), theta(nodes);
    for (int k = 0; k < nodes; ++k) {
        theta[k] = (k + 0.5) * std::numbers::pi / nodes;
        fx[k] = f(std::cos(theta[k]), user);
    }
    std::vector<double> c(degree + 1);
    for (int n = 0; n <= degree; ++n) {
        double acc = 0.0;
        for (int k = 0; k < nodes; ++k) acc += fx[k] * std::cos(n * theta[k]);
        c[n] = 2.0 * acc / nodes;
    }
    c[0] *= 0.5;
    return c;
}

ChebyshevSeries fit_step(double threshold, int degree, const StepFitOptions& opt) {
    if (!(threshold > -1.0 && threshold < 1.0)) throw DomainError("step threshold must lie in (-1, 1)");
    if (degree < 3) throw ParameterError("step fit needs degree >= 3");
    if (opt.node_factor < 2 || opt.damping < 0) throw ParameterError("bad step-fit options");

    ChebyshevSeries s;
    s.degree = degree;
    s.threshold = threshold;
    auto step = [](double x, void* th) { return x > *static_cast<double*>(th) ? 1.0 : 0.0; };
    s.coeffs = chebyshev_project(step, &threshold, degree, opt.node_factor * degree);
    if (opt.damping > 0) {
        for (int n = 1; n <= degree; ++n) {
            const double a = std::numbers::pi * n / (degree + 1);
            s.coeffs[n] *= std::pow(std::sin(a) / a, opt.damping);
        }
    }
    const DeadZone dz = measure_dead_zone(s);
    s.dead_zone = dz.half_width;
    s.max_error = dz.max_error;
    return s;
}

DeadZone measure_dead_zone(const ChebyshevSeries& s, double tol, int grid) {
    std::vector<double> xs(grid), err(grid);
    DeadZone dz;
    for (int i = 0; i < grid; ++i) {
        xs[i] = -1.0 + 2.0 * i / (grid - 1);
        err[i] = std::fabs(s.eval(xs[i]) - (xs[i] > s.threshold ? 1.0 : 0.0));
        if (err[i] > tol) dz.half_width = std::max(dz.half_width, std::fabs(xs[i] - s.threshold));
    }
    for (int i = 0; i < grid; ++i) {
        if (std::fabs(xs[i] - s.threshold) > dz.half_width) dz.max_error = std::max(dz.max_error, err[i]);
    }
    return dz;
}

void save_series_csv(const std::string& path, const ChebyshevSeries& s) {
    std::ofstream os(path);
    if (!os) throw LoadError("cannot write '" + path + "'");
    os << "degree,threshold\n" << s.degree << ',' << std::setprecision(17) << s.threshold << '\n';
    for (double c : s.coeffs) os << c << '\n';
}

ChebyshevSeries load_series_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw LoadError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(is, line) || line.rfind("degree,threshold", 0) != 0) {
        throw FormatError(path + ": missing 'degree,threshold' header");
    }
    ChebyshevSeries s;
    char comma = 0;
    if (!std::getline(is, line)) throw FormatError(path + ": missing degree line");
    std::istringstream hdr(line);
    if (!(hdr >> s.degree >> comma >> s.threshold) || comma != ',' || s.degree < 0) {
        throw FormatError(path + ": malformed degree line");
    }
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        double c;
        if (!(ls >> c)) throw FormatError(path + ": bad coefficient '" + line + "'");
        s.coeffs.push_back(c);
    }
    if (static_cast<int>(s.coeffs.size()) != s.degree + 1) {
        throw FormatError(path + ": expected " + std::to_string(s.degree + 1) + " coefficients, found " +
                          std::to_string(s.coeffs.size()));
    }
    if (s.threshold > -1.0 && s.threshold < 1.0) {
        const DeadZone dz = measure_dead_zone(s);
        s.dead_zone = dz.half_width;
        s.max_error = dz.max_error;
    }
    return s;
}

}  // namespace spikehe::approx
