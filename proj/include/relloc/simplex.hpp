#pragma once
#include <Eigen/Dense>
#include <algorithm>
#include <functional>
#include <numeric>
#include <vector>

// Derivative-free Nelder-Mead minimizer, small fixed dimensions (2-9 here).

namespace relloc {

struct SimplexResult {
    Eigen::VectorXd x;
    double fval = 0;
    int iterations = 0;
    bool converged = false;
};

inline SimplexResult nelder_mead(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x0, double initial_step = 0.1,
    int max_iter = 2000, double f_tol = 1e-12, double x_tol = 1e-6) {
    const int n = int(x0.size());
    std::vector<Eigen::VectorXd> xs(n + 1, x0);
    std::vector<double> fs(n + 1);
    for (int i = 0; i < n; ++i)
        xs[i + 1](i) += (x0(i) != 0.0 ? std::abs(x0(i)) : 1.0) * initial_step;
    for (int i = 0; i <= n; ++i) fs[i] = f(xs[i]);

    std::vector<int> idx(n + 1);
    int it = 0;
    bool converged = false;
    for (; it < max_iter; ++it) {
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(),
                  [&](int a, int b) { return fs[a] < fs[b]; });
        const int best = idx[0], worst = idx[n], second = idx[n - 1];

        double spread = 0;
        for (int i = 1; i <= n; ++i)
            spread = std::max(spread, (xs[idx[i]] - xs[best]).lpNorm<Eigen::Infinity>());
        if (fs[worst] - fs[best] < f_tol && spread < x_tol) {
            converged = true;
            break;
        }

        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
        for (int i = 0; i <= n; ++i)
            if (i != worst) centroid += xs[i];
        centroid /= double(n);

        const Eigen::VectorXd xr = centroid + (centroid - xs[worst]);
        const double fr = f(xr);
        if (fr < fs[best]) {
            const Eigen::VectorXd xe = centroid + 2.0 * (centroid - xs[worst]);
            const double fe = f(xe);
            if (fe < fr) { xs[worst] = xe; fs[worst] = fe; }
            else         { xs[worst] = xr; fs[worst] = fr; }
        } else if (fr < fs[second]) {
            xs[worst] = xr; fs[worst] = fr;
        } else {
            const Eigen::VectorXd xc =
                centroid + 0.5 * (xs[worst] - centroid);
            const double fc = f(xc);
            if (fc < fs[worst]) { xs[worst] = xc; fs[worst] = fc; }
            else {
                for (int i = 0; i <= n; ++i)
                    if (i != best) {
                        xs[i] = xs[best] + 0.5 * (xs[i] - xs[best]);
                        fs[i] = f(xs[i]);
                    }
            }
        }
    }

    const auto bi = std::min_element(fs.begin(), fs.end()) - fs.begin();
    return {xs[bi], fs[bi], it, converged};
}

} // namespace relloc
