#include "mdtd/solver.hpp"

#include "mdtd/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <string>

namespace mdtd {

void SolverConfig::validate() const {
    if (rank < 1) throw InvalidArgument("rank must be >= 1");
    for (int m = 0; m < 3; ++m) {
        if (!(lambda[m] >= 0) || !std::isfinite(lambda[m])) throw InvalidArgument("lambda must be finite and >= 0");
        if (!(rho[m] > 0) || !std::isfinite(rho[m])) throw InvalidArgument("rho must be finite and > 0");
    }
    if (!(lambda_d > 0) || !std::isfinite(lambda_d)) throw InvalidArgument("lambda_d must be finite and > 0");
    if (!(epsilon > 0)) throw InvalidArgument("epsilon must be > 0");
    if (max_iters < 1) throw InvalidArgument("max_iters must be >= 1");
}

Tensor3 MdtdModel::reconstruct() const { return mdtd::reconstruct(factor(0), factor(1), factor(2), scale); }

Tensor3 MdtdModel::reconstruct_codes() const {
    return mdtd::reconstruct(code_factor(0), code_factor(1), code_factor(2), scale);
}

std::vector<double> MdtdModel::reconstruct_codes_at(std::span<const Index3> idx) const {
    return mdtd::reconstruct_at(code_factor(0), code_factor(1), code_factor(2), scale, idx);
}

Index MdtdModel::nnz() const { return mdtd::nnz(z[0], 0.0) + mdtd::nnz(z[1], 0.0) + mdtd::nnz(z[2], 0.0) + rank(); }

// -- individual updates ----------------------------------------------------

Matrix data_term(const Tensor3& d, int mode, const Matrix& phi, const Matrix& first, const Matrix& second) {
    if (phi.rows() != d.dims()[static_cast<std::size_t>(mode - 1)]) {
        throw ShapeError("data_term: dictionary rows do not match the mode length");
    }
    if (first.cols() <= phi.cols()) return phi.transpose() * mttkrp(d, mode, first, second);
    const Matrix projected = mode == 1 ? Matrix(phi.transpose() * d.as_matrix())
                                       : Matrix(phi.transpose() * unfold(d, mode).transpose());
    return projected * khatri_rao(second, first);
}

Matrix data_term(const SparseTensor3& d, int mode, const Matrix& phi, const Matrix& first, const Matrix& second) {
    if (phi.rows() != d.dims()[static_cast<std::size_t>(mode - 1)]) {
        throw ShapeError("data_term: dictionary rows do not match the mode length");
    }
    return phi.transpose() * mttkrp(d, mode, first, second);
}

Matrix y_update_rhs(const Matrix& data, const Matrix& z, const Matrix& gamma, double rho) {
    if (data.rows() != z.rows() || data.cols() != z.cols() || gamma.rows() != z.rows() || gamma.cols() != z.cols()) {
        throw ShapeError("y_update_rhs: operand shapes differ");
    }
    return data + rho * z + gamma;
}

FactorMatrix update_y_orthogonal(const Matrix& rhs, const Matrix& gram, double rho) {
    if (gram.rows() != gram.cols() || gram.cols() != rhs.cols()) throw ShapeError("update_y_orthogonal: bad gram shape");
    Matrix system = gram;
    system.diagonal().array() += rho;
    Eigen::LLT<Matrix> llt(system);
    if (llt.info() != Eigen::Success) {
        throw NumericalError("update_y_orthogonal: Cholesky factorization failed (rho too small or non-finite input)");
    }
    // Y (G + rho I) = R  <=>  (G + rho I) Y^T = R^T.
    return llt.solve(rhs.transpose()).transpose();
}

FactorMatrix update_y_general(const Matrix& rhs, const GramEvd& dict_evd, const Matrix& gram, double rho) {
    if (gram.rows() != gram.cols() || gram.cols() != rhs.cols()) throw ShapeError("update_y_general: bad gram shape");
    if (dict_evd.vectors.rows() != rhs.rows()) throw ShapeError("update_y_general: dictionary EVD size != atom count");
    Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
    if (es.info() != Eigen::Success) throw NumericalError("update_y_general: eigendecomposition of the k x k Gram failed");
    const Matrix& ev = es.eigenvectors();
    const Vector pv = es.eigenvalues().cwiseMax(0.0);
    const Matrix& ed = dict_evd.vectors;
    Matrix core = ed.transpose() * rhs * ev;
    for (Index c = 0; c < core.cols(); ++c)
        for (Index r = 0; r < core.rows(); ++r) core(r, c) /= dict_evd.values(r) * pv(c) + rho;
    return ed * core * ev.transpose();
}

NormalizedFactors normalize_factors(FactorMatrix y) {
    Vector scale(y.cols());
    for (Index c = 0; c < y.cols(); ++c) {
        const double s = y.rows() > 0 ? std::max(y.col(c).cwiseAbs().maxCoeff(), 1e-12) : 1e-12;
        scale(c) = s;
        y.col(c) /= s;
    }
    return {std::move(y), std::move(scale)};
}

FactorMatrix update_z(const FactorMatrix& y, const FactorMatrix& gamma, double lambda, double rho) {
    if (y.rows() != gamma.rows() || y.cols() != gamma.cols()) throw ShapeError("update_z: shapes differ");
    const double threshold = lambda / rho;
    FactorMatrix h = y - gamma / rho;
    return h.unaryExpr([threshold](double v) {
        const double mag = std::abs(v) - threshold;
        return mag > 0 ? std::copysign(mag, v) : 0.0;
    });
}

FactorMatrix update_dual(const FactorMatrix& gamma, const FactorMatrix& z, const FactorMatrix& y, double rho) {
    if (y.rows() != gamma.rows() || y.cols() != gamma.cols() || z.rows() != y.rows() || z.cols() != y.cols()) {
        throw ShapeError("update_dual: shapes differ");
    }
    return gamma + rho * (z - y);
}

Tensor3 update_d_dense(const Tensor3& recon, const Tensor3& x, const Mask& mask, double lambda_d) {
    if (!(recon.dims() == x.dims()) || !(mask.dims() == x.dims())) throw ShapeError("update_d_dense: shapes differ");
    if (!(lambda_d > 0)) throw InvalidArgument("lambda_d must be > 0");
    Tensor3 out = recon;
    for (Index n = 0; n < out.size(); ++n)
        if (mask.observed(n)) out[n] = (recon[n] + lambda_d * x[n]) / (1.0 + lambda_d);
    return out;
}

namespace {

void check_missing_disjoint(const SparseTensor3& x, std::span<const Index3> missing) {
    for (const auto& c : missing) {
        if (!in_range(x.dims(), c)) throw InvalidArgument("missing index out of range");
        if (x.contains(c)) {
            throw InvalidArgument("missing index (" + std::to_string(c.i + 1) + "," + std::to_string(c.j + 1) + "," +
                                  std::to_string(c.t + 1) + ") overlaps an observed entry");
        }
    }
}

std::vector<Index3> entry_indices(const SparseTensor3& x) {
    std::vector<Index3> idx;
    idx.reserve(x.entries().size());
    for (const auto& e : x.entries()) idx.push_back(e.index);
    return idx;
}

// 1/2 ||Omega .* (X - R)||^2 for sparse X with the missing cells excluded,
// using ||R||^2 = s^T (G1 .* G2 .* G3) s so R is never materialized.
double sparse_half_sse(const Matrix& a, const Matrix& b, const Matrix& c, const Vector& s, const SparseTensor3& x,
                       std::span<const Index3> entry_idx, std::span<const Index3> missing) {
    const auto at_entries = reconstruct_at(a, b, c, s, entry_idx);
    double inner = 0.0;
    for (std::size_t n = 0; n < at_entries.size(); ++n) inner += x.entries()[n].value * at_entries[n];
    const Matrix g = (a.transpose() * a).cwiseProduct(b.transpose() * b).cwiseProduct(c.transpose() * c);
    const double norm_r = s.dot(g * s);
    double missing_r = 0.0;
    for (double v : reconstruct_at(a, b, c, s, missing)) missing_r += v * v;
    return 0.5 * std::max(0.0, x.squared_norm() - 2.0 * inner + norm_r - missing_r);
}

double l1_penalty(const MdtdModel& model, const SolverConfig& cfg) {
    double acc = 0.0;
    for (int m = 0; m < 3; ++m) acc += cfg.lambda[m] * model.y[m].cwiseAbs().sum();
    return acc;
}

}  // namespace

SparseTensor3 update_d_sparse(const MdtdModel& model, const SparseTensor3& x, std::span<const Index3> missing) {
    if (!(model.dims() == x.dims())) throw ShapeError("update_d_sparse: model and tensor dimensions differ");
    check_missing_disjoint(x, missing);
    const auto values = reconstruct_at(model.factor(0), model.factor(1), model.factor(2), model.scale, missing);
    std::vector<SparseEntry> entries(x.entries().begin(), x.entries().end());
    entries.reserve(entries.size() + missing.size());
    for (std::size_t n = 0; n < missing.size(); ++n) entries.push_back({missing[n], values[n]});
    return SparseTensor3(x.dims(), std::move(entries));
}

double objective_value(const MdtdModel& model, const Tensor3& x, const Mask* mask, const SolverConfig& cfg) {
    if (!(model.dims() == x.dims())) throw ShapeError("objective_value: model and tensor dimensions differ");
    return 0.5 * sse(x, model.reconstruct(), mask) + l1_penalty(model, cfg);
}

double objective_value(const MdtdModel& model, const SparseTensor3& x, std::span<const Index3> missing,
                       const SolverConfig& cfg) {
    if (!(model.dims() == x.dims())) throw ShapeError("objective_value: model and tensor dimensions differ");
    check_missing_disjoint(x, missing);
    const auto idx = entry_indices(x);
    return sparse_half_sse(model.factor(0), model.factor(1), model.factor(2), model.scale, x, idx, missing) +
           l1_penalty(model, cfg);
}

// -- solve -----------------------------------------------------------------

namespace {

/// Access to the data side of the iteration: D for the Y updates, the
/// masked data-fit term, and the post-iteration D refresh.
class DataSource {
public:
    virtual ~DataSource() = default;
    [[nodiscard]] virtual Dims dims() const = 0;
    [[nodiscard]] virtual Matrix data_term(int mode, const Matrix& phi, const Matrix& first,
                                           const Matrix& second) const = 0;
    /// 1/2 masked SSE of the Y model; refreshes D from the same reconstruction.
    virtual double refresh(const MdtdModel& model) = 0;
    /// Masked SSE of the code (Z) model.
    [[nodiscard]] virtual double code_sse(const MdtdModel& model) const = 0;
    [[nodiscard]] virtual double observed_norm2() const = 0;
};

class DenseSource final : public DataSource {
public:
    DenseSource(const Tensor3& x, const Mask* mask, const SolverConfig& cfg) : x_(x), mask_(mask), cfg_(cfg) {
        if (mask_ && !(mask_->dims() == x_.dims())) throw ShapeError("mask shape does not match the tensor");
        if (cfg.impute == ImputeMode::sparse) {
            throw InvalidArgument("sparse imputation needs a sparse tensor input");
        }
        if (cfg.impute == ImputeMode::dense) {
            if (!mask_) {
                owned_mask_ = Mask::all_observed(x_.dims());
                mask_ = &owned_mask_;
            }
            d_ = x_;
        }
        norm2_ = 0.0;
        for (Index n = 0; n < x_.size(); ++n)
            if (!mask_ || mask_->observed(n)) norm2_ += x_[n] * x_[n];
    }

    Dims dims() const override { return x_.dims(); }

    Matrix data_term(int mode, const Matrix& phi, const Matrix& first, const Matrix& second) const override {
        return mdtd::data_term(current(), mode, phi, first, second);
    }

    double refresh(const MdtdModel& model) override {
        const Tensor3 recon = model.reconstruct();
        const double half = 0.5 * sse(x_, recon, mask_);
        if (cfg_.impute == ImputeMode::dense) d_ = update_d_dense(recon, x_, *mask_, cfg_.lambda_d);
        return half;
    }

    double code_sse(const MdtdModel& model) const override { return sse(x_, model.reconstruct_codes(), mask_); }
    double observed_norm2() const override { return norm2_; }

private:
    const Tensor3& current() const { return cfg_.impute == ImputeMode::dense ? d_ : x_; }

    const Tensor3& x_;
    const Mask* mask_;
    const SolverConfig& cfg_;
    Mask owned_mask_;
    Tensor3 d_;
    double norm2_ = 0.0;
};

class SparseSource final : public DataSource {
public:
    SparseSource(const SparseTensor3& x, std::span<const Index3> missing, const SolverConfig& cfg)
        : x_(x), missing_(missing.begin(), missing.end()), cfg_(cfg) {
        if (cfg.impute == ImputeMode::dense) throw InvalidArgument("dense imputation needs a dense tensor input");
        check_missing_disjoint(x_, missing_);
        // Repeated missing coordinates are rejected here.
        (void)Mask::from_missing(x_.dims(), missing_);
        entry_idx_ = entry_indices(x_);
        imputed_.assign(missing_.size(), 0.0);
    }

    Dims dims() const override { return x_.dims(); }

    Matrix data_term(int mode, const Matrix& phi, const Matrix& first, const Matrix& second) const override {
        if (phi.rows() != x_.dims()[static_cast<std::size_t>(mode - 1)]) {
            throw ShapeError("data_term: dictionary rows do not match the mode length");
        }
        Matrix m = mttkrp(x_, mode, first, second);
        if (cfg_.impute == ImputeMode::sparse && started_) {
            // D = X + (imputed values at the missing cells); MTTKRP is linear in D.
            const int m0 = mode - 1;
            for (std::size_t n = 0; n < missing_.size(); ++n) {
                const std::array<Index, 3> c{missing_[n].i, missing_[n].j, missing_[n].t};
                const auto [p, q] = other_modes(m0);
                for (Index r = 0; r < first.cols(); ++r) m(c[m0], r) += imputed_[n] * first(c[p], r) * second(c[q], r);
            }
        }
        return phi.transpose() * m;
    }

    double refresh(const MdtdModel& model) override {
        const Matrix a = model.factor(0), b = model.factor(1), c = model.factor(2);
        const double half = sparse_half_sse(a, b, c, model.scale, x_, entry_idx_, missing_);
        if (cfg_.impute == ImputeMode::sparse) {
            imputed_ = reconstruct_at(a, b, c, model.scale, missing_);
            started_ = true;
        }
        return half;
    }

    double code_sse(const MdtdModel& model) const override {
        return 2.0 * sparse_half_sse(model.code_factor(0), model.code_factor(1), model.code_factor(2), model.scale, x_,
                                     entry_idx_, missing_);
    }

    double observed_norm2() const override { return x_.squared_norm(); }

private:
    const SparseTensor3& x_;
    std::vector<Index3> missing_;
    const SolverConfig& cfg_;
    std::vector<Index3> entry_idx_;
    std::vector<double> imputed_;
    bool started_ = false;  // D = X until the first refresh
};

std::array<Dictionary, 3> prepared_dictionaries(const std::array<Dictionary, 3>& dicts, const Dims& dims) {
    std::array<Dictionary, 3> out = dicts;
    for (std::size_t m = 0; m < 3; ++m) {
        if (out[m].length() != dims[m]) {
            throw ShapeError("dictionary for mode " + std::to_string(m + 1) + " has " + std::to_string(out[m].length()) +
                             " rows but the mode has length " + std::to_string(dims[m]));
        }
        if (out[m].atom_count() < 1) throw InvalidArgument("dictionary has no atoms");
        if (!out[m].orthonormal && !out[m].gram_evd) out[m] = precompute_gram_evd(std::move(out[m]));
    }
    return out;
}

SolveResult run_admm(DataSource& source, const std::array<Dictionary, 3>& dicts, const SolverConfig& cfg) {
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    const Dims dims = source.dims();
    const double norm2 = source.observed_norm2();
    if (!(norm2 > 0)) throw InvalidArgument("input tensor is zero on all observed cells");

    SolveResult result;
    MdtdModel& model = result.model;
    model.dicts = prepared_dictionaries(dicts, dims);
    const Index k = cfg.rank;

    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    for (int m = 0; m < 3; ++m) {
        Matrix y(model.dicts[m].atom_count(), k);
        for (Index c = 0; c < k; ++c)
            for (Index r = 0; r < y.rows(); ++r) y(r, c) = uniform(rng);
        model.y[m] = y;
        model.z[m] = y;
        model.gamma[m] = Matrix::Zero(y.rows(), k);
    }
    model.scale = Vector::Ones(k);

    FitReport& report = result.report;
    double previous = source.refresh(model) + l1_penalty(model, cfg);
    for (int iter = 1; iter <= cfg.max_iters; ++iter) {
        for (int m = 0; m < 3; ++m) {
            const auto [p, q] = other_modes(m);
            const Matrix first = model.factor(p) * model.scale.asDiagonal();
            const Matrix second = model.factor(q);
            const Matrix gram = kr_gram(first, second);
            const Dictionary& dict = model.dicts[m];
            const Matrix rhs = y_update_rhs(source.data_term(m + 1, dict.atoms, first, second), model.z[m],
                                            model.gamma[m], cfg.rho[m]);
            FactorMatrix y = dict.orthonormal ? update_y_orthogonal(rhs, gram, cfg.rho[m])
                                              : update_y_general(rhs, *dict.gram_evd, gram, cfg.rho[m]);
            auto normalized = normalize_factors(std::move(y));
            model.y[m] = std::move(normalized.y);
            model.scale = model.scale.cwiseProduct(normalized.scale);
            model.z[m] = update_z(model.y[m], model.gamma[m], cfg.lambda[m], cfg.rho[m]);
            model.gamma[m] = update_dual(model.gamma[m], model.z[m], model.y[m], cfg.rho[m]);
        }
        const double half_sse = source.refresh(model);
        const double f = half_sse + l1_penalty(model, cfg);
        if (!std::isfinite(f) || !model.scale.allFinite()) {
            throw NumericalError("objective became non-finite at iteration " + std::to_string(iter), iter);
        }
        report.objective.push_back(f);
        report.fit_trace.push_back(1.0 - std::sqrt(2.0 * half_sse / norm2));
        report.iterations = iter;
        if (std::abs(f - previous) <= cfg.epsilon) {
            report.converged = true;
            break;
        }
        previous = f;
    }

    report.sse = source.code_sse(model);
    report.fit = 1.0 - std::sqrt(report.sse / norm2);
    report.nnz = model.nnz();
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

}  // namespace

SolveResult solve(const Tensor3& x, const Mask* mask, const std::array<Dictionary, 3>& dicts, const SolverConfig& cfg) {
    DenseSource source(x, mask, cfg);
    return run_admm(source, dicts, cfg);
}

SolveResult solve(const SparseTensor3& x, std::span<const Index3> missing, const std::array<Dictionary, 3>& dicts,
                  const SolverConfig& cfg) {
    SparseSource source(x, missing, cfg);
    return run_admm(source, dicts, cfg);
}

}  // namespace mdtd
