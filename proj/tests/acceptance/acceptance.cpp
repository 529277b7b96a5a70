// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.
// Usage: acceptance <path-to-mdtd-binary> [scratch-dir]

#include "mdtd/error.hpp"
#include "mdtd/rank.hpp"
#include "mdtd/solver.hpp"
#include "mdtd/synth.hpp"
#include "oracles.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

using namespace mdtd;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(double v, int digits = 4) {
    std::ostringstream s;
    s.precision(digits);
    s << v;
    return s.str();
}

SynthConfig desk_config(std::uint64_t seed, bool noisy) {
    SynthConfig cfg;
    cfg.dims = Dims(50, 60, 80);
    cfg.atoms = {15, 10};
    cfg.max_period = 5;
    cfg.rank = 5;
    cfg.seed = seed;
    if (!noisy) cfg.snr_db.reset();
    return cfg;
}

std::array<Dictionary, 3> identity_dicts(const Dims& d) {
    return {identity_dictionary(d[0]), identity_dictionary(d[1]), identity_dictionary(d[2])};
}

SolverConfig solver_config(Index rank, double lambda, double rho) {
    SolverConfig cfg;
    cfg.rank = rank;
    cfg.lambda = {lambda, lambda, lambda};
    cfg.rho = {rho, rho, rho};
    return cfg;
}

// -- 1 ----------------------------------------------------------------------------

Outcome kernel_oracles() {
    const auto start = Clock::now();
    oracle::Gen gen(1001);
    bool unfold_exact = true;
    double gram_err = 0.0, recon_err = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const Dims d = gen.dims(1, 6);
        const Index k = gen.integer(1, 5);
        const Tensor3 x = gen.tensor(d);
        for (int mode = 1; mode <= 3; ++mode) {
            const Matrix u = unfold(x, mode);
            for (Index c = 0; c < u.cols(); ++c)
                for (Index r = 0; r < u.rows(); ++r) unfold_exact &= u(r, c) == oracle::unfold_at(x, mode, r, c);
            unfold_exact &= fold(u, mode, d) == x;
        }
        const Matrix a = gen.matrix(d[0], k), b = gen.matrix(d[1], k), c = gen.matrix(d[2], k);
        const Matrix kr = oracle::khatri_rao(b, a);
        gram_err = std::max(gram_err, (kr_gram(a, b) - kr.transpose() * kr).cwiseAbs().maxCoeff());
        const Vector s = gen.vector(k, 0.1, 2.0);
        const Tensor3 fast = reconstruct(a, b, c, s), slow = oracle::reconstruct(a, b, c, s);
        for (Index n = 0; n < fast.size(); ++n) recon_err = std::max(recon_err, std::abs(fast[n] - slow[n]));
    }
    const double secs = seconds_since(start);
    return {unfold_exact && gram_err < 1e-10 && recon_err < 1e-12 && secs < 5.0,
            "unfold round-trip exact=" + std::string(unfold_exact ? "yes" : "no") + ", KR Gram err " +
                fmt(gram_err) + ", reconstruct err " + fmt(recon_err) + ", " + fmt(secs, 3) + " s"};
}

// -- 2 ----------------------------------------------------------------------------

Outcome y_update_correctness() {
    oracle::Gen gen(2002);
    double match = 0.0, stationarity = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const bool orthogonal = trial % 2 == 0;
        const Index n = gen.integer(2, 30), k = gen.integer(1, 5);
        Dictionary dict;
        if (orthogonal) {
            dict.atoms = gen.orthonormal(n, gen.integer(1, n));
            dict.orthonormal = true;
        } else {
            dict = precompute_gram_evd(ramanujan_dictionary(n, static_cast<int>(gen.integer(1, std::min<Index>(n, 8)))));
            if (trial % 4 == 1) {
                dict.atoms = gen.matrix(n, gen.integer(1, 30));
                dict.gram_evd.reset();
                dict = precompute_gram_evd(std::move(dict));
            }
        }
        const Matrix first = gen.matrix(gen.integer(1, 30), k), second = gen.matrix(gen.integer(1, 30), k);
        const Matrix gram = kr_gram(first, second);
        const Matrix rhs = gen.matrix(dict.atom_count(), k);
        const double rho = gen.uniform(0.05, 2.0);
        const Matrix y = orthogonal ? update_y_orthogonal(rhs, gram, rho) : update_y_general(rhs, *dict.gram_evd, gram, rho);
        match = std::max(match, (y - oracle::y_update_dense(rhs, dict.atoms, gram, rho)).cwiseAbs().maxCoeff());
        const Matrix residual = dict.atoms.transpose() * dict.atoms * y * gram + rho * y - rhs;
        stationarity = std::max(stationarity, residual.cwiseAbs().maxCoeff());
    }
    return {match < 1e-8 && stationarity < 1e-8,
            "max |Y - dense solve| " + fmt(match) + ", max stationarity residual " + fmt(stationarity)};
}

// -- 3 ----------------------------------------------------------------------------

Outcome admm_convergence() {
    const auto start = Clock::now();
    const GroundTruth gt = generate(desk_config(0, true));
    const auto r = solve(gt.noisy, nullptr, gt.dicts, solver_config(5, 1e-3, 1.0));
    double gap = 0.0;
    for (int m = 0; m < 3; ++m) gap = std::max(gap, (r.model.z[m] - r.model.y[m]).cwiseAbs().maxCoeff());
    const auto& f = r.report.objective;
    const double last_change = f.size() >= 2 ? std::abs(f[f.size() - 1] - f[f.size() - 2]) : std::abs(f.back());
    const double secs = seconds_since(start);
    return {r.report.converged && last_change <= 1e-4 && r.report.iterations <= 500 && gap < 1e-3 && secs < 60.0,
            "converged=" + std::string(r.report.converged ? "yes" : "no") + " after " +
                std::to_string(r.report.iterations) + " iterations (last |df| " + fmt(last_change) +
                "), max|Z-Y| " + fmt(gap) + ", " + fmt(secs, 3) + " s"};
}

// -- 4 ----------------------------------------------------------------------------

Outcome cpd_reduction() {
    oracle::Gen gen(4004);
    bool ok = true;
    std::string detail;
    for (int trial = 0; trial < 3; ++trial) {
        const Dims d(gen.integer(5, 8), gen.integer(5, 8), gen.integer(5, 8));
        const Index k = 3;
        Tensor3 x = reconstruct(gen.matrix(d[0], k), gen.matrix(d[1], k), gen.matrix(d[2], k), Vector::Ones(k));
        for (Index n = 0; n < x.size(); ++n) x[n] += 0.1 * gen.normal();
        SolverConfig cfg = solver_config(k, 0.0, 0.1);
        cfg.epsilon = 1e-10;
        cfg.max_iters = 20000;
        cfg.seed = static_cast<std::uint64_t>(trial);
        const double admm = solve(x, nullptr, identity_dicts(d), cfg).report.sse;
        const double als = oracle::als_cpd_sse(x, k, 77 + trial);
        const double rel = std::abs(admm - als) / als;
        ok &= rel <= 0.05;
        detail += (trial ? "; " : "") + std::string("SSE ") + fmt(admm) + " vs ALS " + fmt(als) + " (" +
                  fmt(100 * rel, 3) + "%)";
    }
    return {ok, detail};
}

// -- 5 ----------------------------------------------------------------------------

Outcome model_size() {
    const GroundTruth gt = generate(desk_config(0, false));
    const auto id = solve(gt.noisy, nullptr, identity_dicts(gt.noisy.dims()), solver_config(5, 0.0, 0.1)).report;
    Index best_nnz = -1;
    double best_sse = 0.0, best_lambda = 0.0;
    for (double lambda : {0.0, 1e-4, 3e-4, 1e-3, 3e-3, 1e-2}) {
        const auto r = solve(gt.noisy, nullptr, gt.dicts, solver_config(5, lambda, 0.1)).report;
        if (r.sse <= 1.1 * id.sse && (best_nnz < 0 || r.nnz < best_nnz)) {
            best_nnz = r.nnz;
            best_sse = r.sse;
            best_lambda = lambda;
        }
    }
    if (best_nnz < 0) return {false, "no MDTD model within 10% of the identity SSE " + fmt(id.sse)};
    const double ratio = static_cast<double>(best_nnz) / static_cast<double>(id.nnz);
    return {ratio <= 0.5, "identity SSE " + fmt(id.sse) + " NNZ " + std::to_string(id.nnz) + "; MDTD (lambda " +
                              fmt(best_lambda) + ") SSE " + fmt(best_sse) + " NNZ " + std::to_string(best_nnz) +
                              ", ratio " + fmt(ratio, 3)};
}

Outcome full_scale_smoke() {
    const GroundTruth gt = generate(SynthConfig{});
    double best_sse = std::numeric_limits<double>::infinity();
    Index best_nnz = 0;
    for (double lambda : {1e-3, 1e-2, 1e-1, 1.0}) {
        const auto r = solve(gt.noisy, nullptr, gt.dicts, solver_config(10, lambda, 1.0)).report;
        if (r.sse < best_sse) {
            best_sse = r.sse;
            best_nnz = r.nnz;
        }
    }
    return {best_sse <= 1000.0 && best_nnz < 5000,
            "min-SSE row SSE " + fmt(best_sse) + " NNZ " + std::to_string(best_nnz) + " (reference 500 / 1045)"};
}

// -- 6 ----------------------------------------------------------------------------

Outcome imputation() {
    const GroundTruth gt = generate(desk_config(0, true));
    const Dims& d = gt.noisy.dims();
    const Mask mask = make_mask(d, 0.3, 99);
    const auto missing = mask.missing_indices();

    SolverConfig cfg = solver_config(5, 1e-3, 1.0);
    cfg.impute = ImputeMode::dense;
    const auto dense = solve(gt.noisy, &mask, gt.dicts, cfg);

    // both D updates on the same model
    const Tensor3 recon = dense.model.reconstruct();
    const Tensor3 d_dense = update_d_dense(recon, gt.noisy, mask, cfg.lambda_d);
    std::vector<SparseEntry> observed;
    for (Index t = 0; t < d[2]; ++t)
        for (Index j = 0; j < d[1]; ++j)
            for (Index i = 0; i < d[0]; ++i)
                if (mask.observed(Index3{i, j, t})) observed.push_back({{i, j, t}, gt.noisy(i, j, t)});
    const SparseTensor3 x_sparse(d, observed);
    const SparseTensor3 d_sparse = update_d_sparse(dense.model, x_sparse, missing);
    const Tensor3 d_sparse_dense = d_sparse.densify();
    double agree = 0.0;
    for (const auto& c : missing) agree = std::max(agree, std::abs(d_dense(c.i, c.j, c.t) - d_sparse_dense(c.i, c.j, c.t)));
    bool preserved = static_cast<std::size_t>(d_sparse.nnz()) == observed.size() + missing.size();
    for (const auto& e : observed) preserved &= d_sparse_dense(e.index.i, e.index.j, e.index.t) == e.value;

    const auto imputed = dense.model.reconstruct_codes_at(missing);
    double mse = 0.0;
    for (std::size_t n = 0; n < missing.size(); ++n) {
        const auto& c = missing[n];
        mse += std::pow(imputed[n] - gt.noisy(c.i, c.j, c.t), 2);
    }
    mse /= static_cast<double>(missing.size());

    // the sparse solver path end to end
    SolverConfig scfg = cfg;
    scfg.impute = ImputeMode::sparse;
    const auto sparse = solve(x_sparse, missing, gt.dicts, scfg);
    const auto simp = sparse.model.reconstruct_codes_at(missing);
    double smse = 0.0;
    for (std::size_t n = 0; n < missing.size(); ++n) {
        const auto& c = missing[n];
        smse += std::pow(simp[n] - gt.noisy(c.i, c.j, c.t), 2);
    }
    smse /= static_cast<double>(missing.size());

    const double ratio = mse / gt.noise_variance;
    return {agree <= 1e-12 && preserved && ratio <= 2.0,
            "dense/sparse imputed max diff " + fmt(agree) + ", observed kept and |missing| added=" +
                (preserved ? "yes" : "no") + ", masked MSE " + fmt(mse) + " = " + fmt(ratio, 3) +
                "x noise variance (sparse path " + fmt(smse / gt.noise_variance, 3) + "x)"};
}

// -- 7 ----------------------------------------------------------------------------

Outcome rank_estimation() {
    const auto start = Clock::now();
    std::vector<Index> ranks;
    for (Index k = 1; k <= 10; ++k) ranks.push_back(k);
    double total = 0.0;
    std::string chosen, argmax;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const GroundTruth gt = generate(desk_config(seed, false));
        SolverConfig cfg = solver_config(5, 1e-3, 1.0);
        cfg.seed = seed;
        const auto r = estimate_rank(gt.noisy, gt.dicts, ranks, cfg);
        total += std::abs(static_cast<double>(r.chosen - 5));
        chosen += (seed ? "," : "") + std::to_string(r.chosen);
        RankScanConfig by_max;
        by_max.selection = RankSelection::max;
        argmax += (seed ? "," : "") + std::to_string(select_rank(r.candidates, by_max));
    }
    const double mean = total / 5.0;
    const double secs = seconds_since(start);
    return {mean <= 1.0 && secs < 600.0, "chosen ranks " + chosen + " (plain argmax would give " + argmax +
                                             "), mean |chosen-5| " + fmt(mean, 3) + ", " + fmt(secs, 3) + " s"};
}

// -- 8 ----------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

int shell(const std::string& cmd) { return std::system(cmd.c_str()); }

Outcome cli_determinism(const std::string& binary, const fs::path& scratch) {
    fs::remove_all(scratch);
    fs::create_directories(scratch);
    const std::string b = "\"" + binary + "\"";
    const std::string s = scratch.string();
    struct Job {
        std::string name;
        std::string args;
        std::vector<std::string> outputs;  // relative to the scratch directory
    };
    const std::string gen_flags = "--dims 20,24,30 --atoms 8,6 --max-period 4 --rank 3 --seed 5 --missing-fraction 0.2";
    const std::string syn = s + "/syn";
    const std::vector<Job> jobs{
        {"gen", "gen --out " + s + "/gen " + gen_flags,
         {"gen/tensor.txt", "gen/noiseless.txt", "gen/graph1.txt", "gen/codes3.txt", "gen/missing.txt", "gen/observed.txt"}},
        {"decompose", "decompose --input " + syn + "/tensor.txt --dict-file " + syn +
                          "/dicts.txt --rank 3 --lambda 1e-3 --seed 7 --no-timing --out " + s + "/dec.csv --model " + s + "/model.json",
         {"dec.csv", "model.json"}},
        {"decompose sweep", "decompose --input " + syn + "/tensor.txt --dict-file " + syn +
                                "/dicts.txt --rank 3 --sweep-lambda 0,1e-3,1e-2 --seed 7 --no-timing --out " + s + "/sweep.csv",
         {"sweep.csv"}},
        {"impute dense", "impute --input " + syn + "/tensor.txt --missing " + syn + "/missing.txt --truth " + syn +
                             "/tensor.txt --dict-file " + syn + "/dicts.txt --rank 3 --seed 7 --no-timing --out " + s +
                             "/impd.csv --values " + s + "/vald.txt",
         {"impd.csv", "vald.txt"}},
        {"impute sparse", "impute --impute sparse --input " + syn + "/observed.txt --missing " + syn +
                              "/missing.txt --dict-file " + syn + "/dicts.txt --rank 3 --seed 7 --no-timing --out " + s +
                              "/imps.csv --values " + s + "/vals.txt",
         {"imps.csv", "vals.txt"}},
        {"rank", "rank --input " + syn + "/noiseless.txt --dict-file " + syn +
                     "/dicts.txt --ranks 1-4 --lambda 1e-3 --seed 7 --no-timing --out " + s + "/rank.csv",
         {"rank.csv"}},
        {"bench", "bench --grid 10,20 --dims 12,14,10 --atoms 5,5 --max-period 3 --true-rank 2 --rank 2 --communities 2 "
                  "--seed 7 --no-timing --out " + s + "/bench.csv",
         {"bench.csv"}},
    };
    // shared input for the downstream commands
    if (shell(b + " gen --out " + syn + " " + gen_flags + " > /dev/null") != 0) return {false, "gen of shared input failed"};

    std::string failed;
    for (const auto& job : jobs) {
        bool same = true;
        const std::string cmd = b + " " + job.args + " --manifest " + s + "/manifest.json > " + s + "/stdout.txt 2>&1";
        std::vector<std::string> first;
        for (int run = 1; run <= 2; ++run) {
            if (shell(cmd) != 0) same = false;
            std::vector<std::string> bytes{slurp(scratch / "stdout.txt")};
            for (const auto& o : job.outputs) {
                same &= fs::exists(scratch / o) && fs::file_size(scratch / o) > 0;
                bytes.push_back(slurp(scratch / o));
                fs::remove(scratch / o);
            }
            if (run == 1) first = std::move(bytes);
            else same &= first == bytes;
        }
        if (!same) failed += (failed.empty() ? "" : ", ") + job.name;
    }
    return {failed.empty(), failed.empty() ? std::to_string(jobs.size()) + " command variants byte-identical across two runs"
                                           : "differing or failing: " + failed};
}

// -- 9 ----------------------------------------------------------------------------

Outcome convergence_profile() {
    const GroundTruth gt = generate(desk_config(0, true));
    const auto mdtd_run = solve(gt.noisy, nullptr, gt.dicts, solver_config(5, 1e-3, 1.0)).report;
    const auto id_run = solve(gt.noisy, nullptr, identity_dicts(gt.noisy.dims()), solver_config(5, 0.0, 0.1)).report;
    double worst_drop = 0.0;
    for (std::size_t n = 1; n < mdtd_run.fit_trace.size(); ++n)
        worst_drop = std::max(worst_drop, mdtd_run.fit_trace[n - 1] - mdtd_run.fit_trace[n]);
    const double ratio = static_cast<double>(mdtd_run.nnz) / static_cast<double>(id_run.nnz);
    const double fit_gap = std::abs(mdtd_run.fit - id_run.fit);
    return {worst_drop <= 1e-3 && ratio < 0.5 && fit_gap < 0.01,
            "largest fit decrease " + fmt(worst_drop) + " over " + std::to_string(mdtd_run.fit_trace.size()) +
                " iterations; NNZ " + std::to_string(mdtd_run.nnz) + " vs " + std::to_string(id_run.nnz) +
                " (ratio " + fmt(ratio, 3) + "), fit " + fmt(mdtd_run.fit, 5) + " vs " + fmt(id_run.fit, 5)};
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: acceptance <mdtd-binary> [scratch-dir]\n";
        return 2;
    }
    spdlog::set_level(spdlog::level::err);
    const std::string binary = argv[1];
    const fs::path scratch = argc > 2 ? fs::path(argv[2]) : fs::temp_directory_path() / "mdtd_acceptance";

    struct Criterion {
        std::string label;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {"1 kernel oracle suite", kernel_oracles},
        {"2 Y-update correctness", y_update_correctness},
        {"3 ADMM feasibility and convergence", admm_convergence},
        {"4 CPD-reduction equivalence", cpd_reduction},
        {"5 model-size advantage", model_size},
        {"6 imputation", imputation},
        {"7 rank estimation", rank_estimation},
        {"8 CLI determinism", [&] { return cli_determinism(binary, scratch); }},
        {"9 convergence profile", convergence_profile},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failures;
        std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << c.label << ": " << o.detail << std::endl;
    }

    if (const char* full = std::getenv("MDTD_FULL_SCALE"); full && std::string(full) == "1") {
        Outcome o;
        try {
            o = full_scale_smoke();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << "5b full-scale smoke: " << o.detail << std::endl;
        if (!o.pass) ++failures;
    } else {
        std::cout << "[SKIP] 5b full-scale smoke: set MDTD_FULL_SCALE=1 to run" << std::endl;
    }

    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
