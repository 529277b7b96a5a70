#pragma once

// ADMM solver for the multi-dictionary decomposition
//
//   min  1/2 || Omega .* (X - [[S .* Phi1 Y1, Phi2 Y2, Phi3 Y3]]) ||_F^2 + sum_i lambda_i ||Y_i||_1
//
// with per-mode sparsity proxies Z_i = Y_i, duals Gamma_i and an auxiliary
// reconstruction D that carries imputed values for missing cells.
//
// Sign convention: update_z and update_dual use H = Y - Gamma/rho and
// Gamma += rho (Z - Y). The matching Y-subproblem right-hand side is
// Phi^T D^T (B (.) A) + rho Z + Gamma (see y_update_rhs).
//
// Scale bookkeeping: the model keeps one scale vector S. Each Y_i update sees
// the current S folded into the other-mode factors; the new Y_i is then
// max-abs normalized per column and S is multiplied by the removed scales.

#include "mdtd/dictionary.hpp"
#include "mdtd/tensor.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace mdtd {

enum class ImputeMode { none, dense, sparse };

struct SolverConfig {
    Index rank = 10;
    std::array<double, 3> lambda{0.0, 0.0, 0.0};
    std::array<double, 3> rho{1.0, 1.0, 1.0};
    double lambda_d = 1.0;
    double epsilon = 1e-4;
    int max_iters = 500;
    ImputeMode impute = ImputeMode::none;
    std::uint64_t seed = 0;

    /// Throws InvalidArgument on out-of-range fields.
    void validate() const;
};

struct MdtdModel {
    std::array<Dictionary, 3> dicts;
    std::array<FactorMatrix, 3> y;
    std::array<FactorMatrix, 3> z;
    std::array<FactorMatrix, 3> gamma;
    Vector scale;

    [[nodiscard]] Index rank() const { return scale.size(); }
    [[nodiscard]] Dims dims() const { return {dicts[0].length(), dicts[1].length(), dicts[2].length()}; }

    /// Phi_i * Y_i (zero-based mode).
    [[nodiscard]] Matrix factor(int mode0) const { return dicts[mode0].atoms * y[mode0]; }
    /// Phi_i * Z_i (zero-based mode).
    [[nodiscard]] Matrix code_factor(int mode0) const { return dicts[mode0].atoms * z[mode0]; }

    /// [[S .* Phi1 Y1, Phi2 Y2, Phi3 Y3]], the reconstruction the objective uses.
    [[nodiscard]] Tensor3 reconstruct() const;
    /// Same with the sparse codes Z_i; this is the stored / reported model.
    [[nodiscard]] Tensor3 reconstruct_codes() const;
    [[nodiscard]] std::vector<double> reconstruct_codes_at(std::span<const Index3> idx) const;

    /// Nonzeros of all Z_i (exact zeros) plus one per scale entry.
    [[nodiscard]] Index nnz() const;
};

struct FitReport {
    std::vector<double> objective;  // one entry per iteration
    std::vector<double> fit_trace;  // fit of the Y-reconstruction on observed cells, per iteration
    int iterations = 0;
    bool converged = false;
    double sse = 0.0;  // code (Z) model, observed cells
    double fit = 0.0;
    Index nnz = 0;
    double seconds = 0.0;
};

struct SolveResult {
    MdtdModel model;
    FitReport report;
};

/// Dense input. `mask` may be null (everything observed). Impute modes:
/// none (D = X), dense (closed-form D update each iteration). `sparse` is
/// rejected for dense input.
[[nodiscard]] SolveResult solve(const Tensor3& x, const Mask* mask, const std::array<Dictionary, 3>& dicts,
                                const SolverConfig& cfg);

/// Sparse input. Coordinates absent from `x` and not listed in `missing`
/// are observed zeros. Impute modes: none (D = X) or sparse (D = X plus
/// reconstructed values at `missing`). `dense` is rejected for sparse input.
[[nodiscard]] SolveResult solve(const SparseTensor3& x, std::span<const Index3> missing,
                                const std::array<Dictionary, 3>& dicts, const SolverConfig& cfg);

// -- individual updates ----------------------------------------------------

/// Phi^T * unfold(d, mode)^T * khatri_rao(second, first). Multiplies the
/// MTTKRP first when rank <= atom count, otherwise projects D onto Phi first.
[[nodiscard]] Matrix data_term(const Tensor3& d, int mode, const Matrix& phi, const Matrix& first,
                               const Matrix& second);
[[nodiscard]] Matrix data_term(const SparseTensor3& d, int mode, const Matrix& phi, const Matrix& first,
                               const Matrix& second);

/// data + rho * Z + Gamma.
[[nodiscard]] Matrix y_update_rhs(const Matrix& data, const Matrix& z, const Matrix& gamma, double rho);

/// Solves Y (gram + rho I) = rhs with a Cholesky factorization.
[[nodiscard]] FactorMatrix update_y_orthogonal(const Matrix& rhs, const Matrix& gram, double rho);

/// Solves Phi^T Phi Y gram + rho Y = rhs through the dictionary Gram EVD and
/// the EVD of the k x k Khatri-Rao Gram.
[[nodiscard]] FactorMatrix update_y_general(const Matrix& rhs, const GramEvd& dict_evd, const Matrix& gram,
                                            double rho);

struct NormalizedFactors {
    FactorMatrix y;
    Vector scale;
};

/// Divides each column by its max absolute entry (clamped below at 1e-12).
[[nodiscard]] NormalizedFactors normalize_factors(FactorMatrix y);

/// Soft threshold of H = Y - Gamma/rho at lambda/rho.
[[nodiscard]] FactorMatrix update_z(const FactorMatrix& y, const FactorMatrix& gamma, double lambda, double rho);

/// Gamma + rho (Z - Y).
[[nodiscard]] FactorMatrix update_dual(const FactorMatrix& gamma, const FactorMatrix& z, const FactorMatrix& y,
                                       double rho);

/// (recon + lambda_d * mask .* x) ./ (1 + lambda_d * mask).
[[nodiscard]] Tensor3 update_d_dense(const Tensor3& recon, const Tensor3& x, const Mask& mask, double lambda_d);

/// Observed entries of `x` copied unchanged plus [[S .* Phi1 Y1, ...]]
/// evaluated at each missing coordinate (and nowhere else).
[[nodiscard]] SparseTensor3 update_d_sparse(const MdtdModel& model, const SparseTensor3& x,
                                            std::span<const Index3> missing);

/// Objective on the Y factors (mask may be null).
[[nodiscard]] double objective_value(const MdtdModel& model, const Tensor3& x, const Mask* mask,
                                     const SolverConfig& cfg);
[[nodiscard]] double objective_value(const MdtdModel& model, const SparseTensor3& x,
                                     std::span<const Index3> missing, const SolverConfig& cfg);

// -- model dump ------------------------------------------------------------

/// Versioned JSON document: dims, rank, scale, and per mode the dictionary
/// spec plus (atom, factor, value) triplets of Z.
void save_model(std::ostream& out, const MdtdModel& model);
void save_model(const std::filesystem::path& path, const MdtdModel& model);

/// Rebuilds dictionaries from their spec strings.
[[nodiscard]] MdtdModel load_model(std::istream& in);
[[nodiscard]] MdtdModel load_model(const std::filesystem::path& path);
/// Uses the given dictionaries instead of rebuilding them.
[[nodiscard]] MdtdModel load_model(std::istream& in, std::array<Dictionary, 3> dicts);

}  // namespace mdtd
