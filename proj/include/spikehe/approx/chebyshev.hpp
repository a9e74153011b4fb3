#pragma once

#include <string>
#include <vector>

#include "spikehe/backend/backend.hpp"

namespace spikehe::approx {

/// T_n(x) by the three-term recurrence.
double cheb_recurrence(int n, double x);

/// f(x) ~ sum c_n T_n(x) on [-1, 1].
struct ChebyshevSeries {
    int degree = 0;
    double threshold = 0.0;
    std::vector<double> coeffs;
    /// Half-width around the threshold where the step error may exceed 0.05 (measured).
    double dead_zone = 0.0;
    /// Largest step error outside the dead zone on the measurement grid.
    double max_error = 0.0;

    /// Clenshaw evaluation.
    double eval(double x) const;
};

struct StepFitOptions {
    /// Exponent on the Lanczos sigma factors; 0 gives the plain projection.
    double damping = 0.5;
    /// Quadrature nodes as a multiple of the degree.
    int node_factor = 4;
};

/// Chebyshev-Gauss projection of f(x) = [x > threshold], damped to tame Gibbs overshoot.
ChebyshevSeries fit_step(double threshold, int degree, const StepFitOptions& opt = {});

/// Undamped Chebyshev-Gauss projection of an arbitrary function.
std::vector<double> chebyshev_project(double (*f)(double, void*), void* user, int degree, int nodes);

struct DeadZone {
    double half_width = 0.0;
    double max_error = 0.0;
};

/// Scans `grid` equispaced points of [-1, 1]; the dead zone is the largest |x - Th|
/// where the step error exceeds `tol`.
DeadZone measure_dead_zone(const ChebyshevSeries& s, double tol = 0.05, int grid = 10000);

/// CSV: header "degree,threshold" with their values, then one coefficient per line.
void save_series_csv(const std::string& path, const ChebyshevSeries& s);
ChebyshevSeries load_series_csv(const std::string& path);

/// Levels consumed by eval_series_encrypted for a degree-n series.
int series_depth(int degree);

/// Baby-step/giant-step evaluation over the Chebyshev basis. Slots must lie in
/// [-1, 1]. The result is Raw-tagged and sits exactly series_depth(degree) levels
/// below the input. With `mask`, the result is multiplied slot-wise by it at no
/// extra depth.
backend::CipherVector eval_series_encrypted(backend::Backend& b, const backend::CipherVector& x,
                                            const ChebyshevSeries& s, const std::vector<double>* mask = nullptr);

/// Multiplies by 1/scale_value (one level) and tags the result as Scaled.
backend::CipherVector scale_to_interval(backend::Backend& b, const backend::CipherVector& x, double scale_value);

}  // namespace spikehe::approx
