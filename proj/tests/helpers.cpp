#include "helpers.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace pmuev::testing {

namespace {

// regularized incomplete gamma, series form (x < a+1)
double gamma_p_series(double a, double x) {
    double term = 1.0 / a, sum = term, ap = a;
    for (int i = 0; i < 500; ++i) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::abs(term) < std::abs(sum) * 1e-15) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// regularized upper incomplete gamma, Lentz continued fraction (x >= a+1)
double gamma_q_cf(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
    for (int i = 1; i <= 500; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-15) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double chi2_sf(double x, int k) {
    if (k < 1) throw std::invalid_argument("chi2_sf needs k >= 1");
    if (x <= 0.0) return 1.0;
    const double a = 0.5 * k, half = 0.5 * x;
    return half < a + 1.0 ? 1.0 - gamma_p_series(a, half) : gamma_q_cf(a, half);
}

double silhouette(const Eigen::MatrixXd& points, const std::vector<int>& labels) {
    const auto n = points.rows();
    if (n < 2 || static_cast<Eigen::Index>(labels.size()) != n)
        throw std::invalid_argument("silhouette needs >= 2 labeled points");

    int max_label = 0;
    for (const int l : labels) max_label = std::max(max_label, l);
    std::vector<long> counts(static_cast<std::size_t>(max_label) + 1, 0);
    for (const int l : labels) ++counts[static_cast<std::size_t>(l)];

    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        std::vector<double> sum_to(counts.size(), 0.0);
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i) continue;
            sum_to[static_cast<std::size_t>(labels[static_cast<std::size_t>(j)])] +=
                (points.row(i) - points.row(j)).norm();
        }
        const auto own = static_cast<std::size_t>(labels[static_cast<std::size_t>(i)]);
        if (counts[own] < 2) continue;  // singleton scores 0
        const double a = sum_to[own] / static_cast<double>(counts[own] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < counts.size(); ++c)
            if (c != own && counts[c] > 0) b = std::min(b, sum_to[c] / static_cast<double>(counts[c]));
        if (!std::isfinite(b)) continue;  // single cluster overall
        total += (b - a) / std::max(a, b);
    }
    return total / static_cast<double>(n);
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2) throw std::invalid_argument("pearson needs matched series");
    const auto n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double num = 0.0, da = 0.0, db = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - ma) * (b[i] - mb);
        da += (a[i] - ma) * (a[i] - ma);
        db += (b[i] - mb) * (b[i] - mb);
    }
    return num / std::sqrt(da * db);
}

GradCheckResult check_gradients(const nn::NetSpec& net, const nn::ParamStore<double>& params,
                                const nn::Tensor4<double>& input,
                                const nn::Tensor4<double>& out_grad, double h, int max_per_param) {
    auto objective = [&](const nn::ParamStore<double>& p, const nn::Tensor4<double>& x) {
        const auto y = nn::forward(net, p, x);
        double j = 0.0;
        for (std::size_t i = 0; i < y.v.size(); ++i) j += y.v[i] * out_grad.v[i];
        return j;
    };

    nn::ForwardCache<double> cache;
    nn::forward(net, params, input, &cache);
    auto grads = nn::make_grads(params);
    const auto in_grad = nn::backward(net, params, cache, out_grad, grads);

    GradCheckResult result;
    auto record = [&](double analytic, double numeric, const std::string& where) {
        const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-4});
        const double rel = std::abs(analytic - numeric) / denom;
        if (rel > result.max_rel_err) {
            result.max_rel_err = rel;
            result.worst = where;
        }
    };

    for (const auto& [name, grad] : grads) {
        nn::ParamStore<double> jiggled = params;
        auto& value = jiggled.at(name).value;
        const std::size_t size = value.size();
        const std::size_t step =
            size > static_cast<std::size_t>(max_per_param) ? size / static_cast<std::size_t>(max_per_param) : 1;
        for (std::size_t i = 0; i < size; i += step) {
            const double saved = value[i];
            value[i] = saved + h;
            const double up = objective(jiggled, input);
            value[i] = saved - h;
            const double down = objective(jiggled, input);
            value[i] = saved;
            record(grad[i], (up - down) / (2.0 * h), name);
        }
    }

    nn::Tensor4<double> jiggled = input;
    const std::size_t size = jiggled.v.size();
    const std::size_t step =
        size > static_cast<std::size_t>(max_per_param) ? size / static_cast<std::size_t>(max_per_param) : 1;
    for (std::size_t i = 0; i < size; i += step) {
        const double saved = jiggled.v[i];
        jiggled.v[i] = saved + h;
        const double up = objective(params, jiggled);
        jiggled.v[i] = saved - h;
        const double down = objective(params, jiggled);
        jiggled.v[i] = saved;
        record(in_grad.v[i], (up - down) / (2.0 * h), "input");
    }
    return result;
}

}  // namespace pmuev::testing
