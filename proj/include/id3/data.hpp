#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "id3/rng.hpp"
#include "id3/tensor.hpp"

namespace id3 {

struct Dataset {
    Tensor x;                      // n x d
    std::vector<std::size_t> y;    // class indices
    std::size_t size() const { return y.size(); }
    std::size_t dims() const { return x.cols(); }
};

struct LabeledSplit {
    Dataset train;
    Dataset test;
};

struct TaskSpec {
    std::string generator = "gaussian_blobs";  // gaussian_blobs | xor_grid
    std::size_t classes = 2;
    std::size_t dims = 2;
    double separation = 4.0;
    std::size_t train_n = 512;
    std::size_t test_n = 256;
    std::vector<double> shift;  // empty = no translation
};

namespace detail {

inline Dataset gaussian_blobs(std::size_t k, std::size_t d, double sep, std::size_t n,
                              const std::vector<double>& shift, Rng& rng) {
    if (k < 2 || d < 1 || n < k) throw ConfigError("gaussian_blobs: bad parameters");
    // class means on a circle in the first two dims (or a line if d == 1)
    std::vector<std::vector<double>> means(k, std::vector<double>(d, 0.0));
    for (std::size_t c = 0; c < k; ++c) {
        const double a = 6.283185307179586 * static_cast<double>(c) / static_cast<double>(k);
        means[c][0] = sep * 0.5 * std::cos(a);
        if (d > 1) means[c][1] = sep * 0.5 * std::sin(a);
    }
    Dataset ds;
    ds.x = Tensor({n, d});
    ds.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = i % k;  // balanced labels
        ds.y[i] = c;
        for (std::size_t j = 0; j < d; ++j) {
            double v = means[c][j] + rng.normal();
            if (j < shift.size()) v += shift[j];
            ds.x.at(i, j) = v;
        }
    }
    return ds;
}

inline Dataset xor_grid(std::size_t n, const std::vector<double>& shift, Rng& rng) {
    Dataset ds;
    ds.x = Tensor({n, 2});
    ds.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        // balanced: quadrants (+,+) and (-,-) are class 0, the others class 1
        const std::size_t quadrant = i % 4;
        const double sx = (quadrant == 0 || quadrant == 2) ? 1.0 : -1.0;
        const double sy = (quadrant == 0 || quadrant == 3) ? 1.0 : -1.0;
        ds.y[i] = (sx * sy > 0) ? 0 : 1;
        ds.x.at(i, 0) = sx * (0.5 + rng.uniform()) + (shift.size() > 0 ? shift[0] : 0.0);
        ds.x.at(i, 1) = sy * (0.5 + rng.uniform()) + (shift.size() > 1 ? shift[1] : 0.0);
    }
    return ds;
}

}  // namespace detail

// Deterministic labeled dataset with train/test split. The shifted variant
// uses the same generator draws with translated coordinates.
inline LabeledSplit gen_synthetic(const TaskSpec& spec, std::uint64_t seed) {
    LabeledSplit out;
    Rng train_rng(derive_seed(seed, 1));
    Rng test_rng(derive_seed(seed, 2));
    if (spec.generator == "gaussian_blobs") {
        out.train = detail::gaussian_blobs(spec.classes, spec.dims, spec.separation,
                                           spec.train_n, spec.shift, train_rng);
        out.test = detail::gaussian_blobs(spec.classes, spec.dims, spec.separation,
                                          spec.test_n, spec.shift, test_rng);
    } else if (spec.generator == "xor_grid") {
        out.train = detail::xor_grid(spec.train_n, spec.shift, train_rng);
        out.test = detail::xor_grid(spec.test_n, spec.shift, test_rng);
    } else {
        throw ConfigError("unknown dataset generator: " + spec.generator);
    }
    return out;
}

}  // namespace id3
