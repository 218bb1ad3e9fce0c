#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "quantconf/error.hpp"

namespace quantconf {

enum class QuantMethod { rtn, error_compensated };

struct QuantConfig {
    int num_bits = 4;
    int group_size = 128;
    double damp_percent = 0.01;  // fraction of mean(diag H) added to the diagonal
    bool symmetric = true;
    bool true_sequential = true;
    // Quantize columns by descending Hessian diagonal, with group scales fixed
    // up front from the original weights. Off by default.
    bool desc_act = false;
    QuantMethod method = QuantMethod::rtn;

    void validate() const {
        if (num_bits < 2 || num_bits > 8) throw Error("quantlab", "num_bits must lie in [2, 8]");
        if (group_size < 1) throw Error("quantlab", "group_size must be >= 1");
        if (!(damp_percent > 0.0)) throw Error("quantlab", "damp_percent must be > 0");
        if (!symmetric) throw Error("quantlab", "only the symmetric grid is supported");
    }
    // Largest code magnitude on the zero-symmetric grid.
    int max_code() const { return (1 << (num_bits - 1)) - 1; }
};

// Codes and per-(row, group) scales. Groups are contiguous runs of
// `group_size` columns within a row; the last group may be shorter.
template <typename Scalar = double>
struct QuantizedLayer {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    Eigen::MatrixXi codes;
    Matrix scales;
    int group_size = 128;
    int num_bits = 4;

    Eigen::Index num_groups() const { return scales.cols(); }

    Scalar scale(Eigen::Index row, Eigen::Index col) const { return scales(row, col / group_size); }

    Matrix dequantize() const {
        Matrix out(codes.rows(), codes.cols());
        for (Eigen::Index j = 0; j < codes.cols(); ++j) {
            const Eigen::Index g = j / group_size;
            for (Eigen::Index i = 0; i < codes.rows(); ++i) {
                out(i, j) = static_cast<Scalar>(codes(i, j)) * scales(i, g);
            }
        }
        return out;
    }
};

namespace detail {

inline Eigen::Index num_groups(Eigen::Index cols, int group_size) {
    return (cols + group_size - 1) / group_size;
}

// scale = max|w| / max_code over the group; an all-zero group gets scale 1.
template <typename Derived>
typename Derived::Scalar group_scale(const Eigen::MatrixBase<Derived>& group, int max_code) {
    using Scalar = typename Derived::Scalar;
    const Scalar peak = group.cwiseAbs().maxCoeff();
    return peak > Scalar(0) ? peak / Scalar(max_code) : Scalar(1);
}

// Round half to even (default FE_TONEAREST) and clamp onto the grid.
template <typename Scalar>
int quantize_value(Scalar w, Scalar scale, int max_code) {
    using std::nearbyint;
    const Scalar r = nearbyint(w / scale);
    const Scalar c = r > Scalar(max_code) ? Scalar(max_code) : (r < Scalar(-max_code) ? Scalar(-max_code) : r);
    return static_cast<int>(c);
}

template <typename Derived>
void check_finite(const Eigen::MatrixBase<Derived>& m, const char* what) {
    if (!m.allFinite()) throw Error("quantlab", std::string("non-finite value in ") + what);
}

}  // namespace detail

template <typename Derived>
QuantizedLayer<typename Derived::Scalar> quantize_rtn(const Eigen::MatrixBase<Derived>& weights,
                                                      const QuantConfig& cfg) {
    using Scalar = typename Derived::Scalar;
    cfg.validate();
    detail::check_finite(weights, "weights");
    const Eigen::Index rows = weights.rows();
    const Eigen::Index cols = weights.cols();
    const int qmax = cfg.max_code();

    QuantizedLayer<Scalar> out;
    out.group_size = cfg.group_size;
    out.num_bits = cfg.num_bits;
    out.codes.resize(rows, cols);
    out.scales.resize(rows, detail::num_groups(cols, cfg.group_size));
    for (Eigen::Index g = 0; g < out.scales.cols(); ++g) {
        const Eigen::Index begin = g * cfg.group_size;
        const Eigen::Index width = std::min<Eigen::Index>(cfg.group_size, cols - begin);
        for (Eigen::Index i = 0; i < rows; ++i) {
            const Scalar s = detail::group_scale(weights.row(i).segment(begin, width), qmax);
            out.scales(i, g) = s;
            for (Eigen::Index j = begin; j < begin + width; ++j) {
                out.codes(i, j) = detail::quantize_value(weights(i, j), s, qmax);
            }
        }
    }
    return out;
}

// Column-wise error-compensated quantization against the layer Hessian
// H = 2 X Xᵀ + λI. `calib_inputs` is (in_features × samples). After each column
// is rounded, its weighted residual is pushed onto the not-yet-quantized
// columns through the upper Cholesky factor of H⁻¹.
template <typename DerivedW, typename DerivedX>
QuantizedLayer<typename DerivedW::Scalar> quantize_compensated(
    const Eigen::MatrixBase<DerivedW>& weights, const Eigen::MatrixBase<DerivedX>& calib_inputs,
    const QuantConfig& cfg) {
    using Scalar = typename DerivedW::Scalar;
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    cfg.validate();
    detail::check_finite(weights, "weights");
    detail::check_finite(calib_inputs, "calibration inputs");
    const Eigen::Index rows = weights.rows();
    const Eigen::Index cols = weights.cols();
    if (calib_inputs.rows() != cols) throw Error("quantlab", "calibration inputs do not match layer width");
    if (calib_inputs.cols() < 1) throw Error("quantlab", "degenerate calibration data");
    const int qmax = cfg.max_code();

    const Matrix x = calib_inputs;
    Matrix hessian = Scalar(2) * x * x.transpose();
    const Scalar damp = Scalar(cfg.damp_percent) * hessian.diagonal().mean();
    hessian.diagonal().array() += damp;

    // Column visiting order; natural unless desc_act.
    std::vector<Eigen::Index> order(static_cast<std::size_t>(cols));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    if (cfg.desc_act) {
        std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
            return hessian(a, a) > hessian(b, b);
        });
    }
    Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, Eigen::Index> perm(cols);
    for (Eigen::Index k = 0; k < cols; ++k) perm.indices()(k) = order[static_cast<std::size_t>(k)];
    const Matrix h_perm = perm.transpose() * hessian * perm;

    Eigen::LLT<Matrix> llt(h_perm);
    if (!(damp > Scalar(0)) || llt.info() != Eigen::Success) {
        throw Error("quantlab", "degenerate calibration data");
    }
    const Matrix h_inv = llt.solve(Matrix::Identity(cols, cols));
    Eigen::LLT<Matrix> llt_inv(h_inv);
    if (llt_inv.info() != Eigen::Success) throw Error("quantlab", "degenerate calibration data");
    const Matrix upper = llt_inv.matrixU();

    Matrix work = weights * perm;  // column k of work is original column order[k]

    QuantizedLayer<Scalar> out;
    out.group_size = cfg.group_size;
    out.num_bits = cfg.num_bits;
    out.codes.resize(rows, cols);
    out.scales.resize(rows, detail::num_groups(cols, cfg.group_size));
    if (cfg.desc_act) {
        for (Eigen::Index g = 0; g < out.scales.cols(); ++g) {
            const Eigen::Index begin = g * cfg.group_size;
            const Eigen::Index width = std::min<Eigen::Index>(cfg.group_size, cols - begin);
            for (Eigen::Index i = 0; i < rows; ++i) {
                out.scales(i, g) = detail::group_scale(weights.row(i).segment(begin, width), qmax);
            }
        }
    }

    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> err(rows);
    for (Eigen::Index k = 0; k < cols; ++k) {
        const Eigen::Index j = order[static_cast<std::size_t>(k)];
        const Eigen::Index g = j / cfg.group_size;
        if (!cfg.desc_act && j % cfg.group_size == 0) {
            // Group scales come from the already-compensated weights.
            const Eigen::Index width = std::min<Eigen::Index>(cfg.group_size, cols - j);
            for (Eigen::Index i = 0; i < rows; ++i) {
                out.scales(i, g) = detail::group_scale(work.row(i).segment(k, width), qmax);
            }
        }
        const Scalar d = upper(k, k);
        for (Eigen::Index i = 0; i < rows; ++i) {
            const Scalar s = out.scales(i, g);
            const int code = detail::quantize_value(work(i, k), s, qmax);
            out.codes(i, j) = code;
            err(i) = (work(i, k) - static_cast<Scalar>(code) * s) / d;
        }
        const Eigen::Index rest = cols - k - 1;
        if (rest > 0) {
            work.rightCols(rest).noalias() -= err * upper.row(k).tail(rest);
        }
    }
    return out;
}

template <typename DerivedW, typename DerivedQ, typename DerivedX>
typename DerivedW::Scalar calibration_error(const Eigen::MatrixBase<DerivedW>& weights,
                                            const Eigen::MatrixBase<DerivedQ>& dequantized,
                                            const Eigen::MatrixBase<DerivedX>& calib_inputs) {
    return ((weights - dequantized) * calib_inputs).squaredNorm();
}

}  // namespace quantconf
