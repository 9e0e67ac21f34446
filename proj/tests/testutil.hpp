#ifndef GCPA_TESTS_TESTUTIL_HPP
#define GCPA_TESTS_TESTUTIL_HPP

#include <doctest.h>

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "gcpa/core/ops.hpp"
#include "gcpa/core/rng.hpp"

namespace gcpa::testutil {

template <typename T = double>
Tensor<T> random_tensor(Rng& rng, std::vector<long> shape, double lo = -1, double hi = 1) {
    Tensor<T> t(std::move(shape));
    for (long i = 0; i < t.numel(); ++i) t[i] = T(rng.uniform(lo, hi));
    return t;
}

template <typename T>
Var<T> leafv(Tensor<T> t, bool requires_grad = true) {
    return Var<T>::leaf(std::move(t), requires_grad);
}

// Fills with an arithmetic sequence; mirrors the generator used by the
// oracle scripts so frozen cases share one weight definition.
template <typename T>
void fillseq(Tensor<T>& t, double start, double step) {
    for (long i = 0; i < t.numel(); ++i) t[i] = T(start + step * double(i));
}

// Central-difference check of analytic backward() for a scalar-valued graph.
// f rebuilds the graph from the (mutated-in-place) leaf values on every call.
inline void gradcheck(std::vector<Var<double>> leaves, const std::function<Var<double>()>& f,
                      double h = 1e-5, double rtol = 1e-3) {
    auto out = f();
    REQUIRE(out.value().numel() == 1);
    backward(out);
    std::vector<Tensor<double>> analytic;
    for (auto& l : leaves) analytic.push_back(l.grad());

    double worst = 0;
    std::string where;
    for (size_t li = 0; li < leaves.size(); ++li) {
        auto& v = leaves[li].value();
        for (long i = 0; i < v.numel(); ++i) {
            double orig = v[i];
            double f1, f0;
            {
                NoGradGuard ng;
                v[i] = orig + h;
                f1 = f().value()[0];
                v[i] = orig - h;
                f0 = f().value()[0];
            }
            v[i] = orig;
            double fd = (f1 - f0) / (2 * h);
            double an = analytic[li][i];
            double m = std::max(std::abs(an), std::abs(fd));
            if (m < 1e-6) continue;
            double rel = std::abs(an - fd) / m;
            if (rel > worst) {
                worst = rel;
                where = "leaf " + std::to_string(li) + " elem " + std::to_string(i) + ": analytic " +
                        std::to_string(an) + " vs fd " + std::to_string(fd);
            }
        }
    }
    INFO(where);
    CHECK(worst < rtol);
}

template <typename T>
void check_tensor(const Tensor<T>& got, const std::vector<T>& want, double tol,
                  const char* what = "tensor") {
    REQUIRE(got.numel() == long(want.size()));
    double worst = 0;
    long worst_i = -1;
    for (long i = 0; i < got.numel(); ++i) {
        double d = std::abs(double(got[i]) - double(want[i]));
        if (d > worst) {
            worst = d;
            worst_i = i;
        }
    }
    INFO(what << " elem " << worst_i << ": got "
              << (worst_i >= 0 ? double(got[worst_i]) : 0.0) << ", want "
              << (worst_i >= 0 ? double(want[size_t(worst_i)]) : 0.0));
    CHECK(worst <= tol);
}

}  // namespace gcpa::testutil

#endif
