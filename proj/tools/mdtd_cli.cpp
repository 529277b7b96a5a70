#include "mdtd_cli.hpp"

#include "mdtd/error.hpp"
#include "mdtd/io.hpp"
#include "mdtd/rank.hpp"
#include "mdtd/solver.hpp"
#include "mdtd/synth.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <sstream>

namespace mdtd::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using io::format_double;

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) out.push_back(cur);
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

double parse_real(const std::string& tok, const std::string& what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw InvalidArgument(what + ": expected a number, got '" + tok + "'");
    }
}

Index parse_index(const std::string& tok, const std::string& what) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        return static_cast<Index>(v);
    } catch (const std::exception&) {
        throw InvalidArgument(what + ": expected an integer, got '" + tok + "'");
    }
}

std::vector<double> parse_reals(const std::string& s, const std::string& what) {
    std::vector<double> out;
    for (const auto& tok : split(s, ',')) out.push_back(parse_real(tok, what));
    if (out.empty()) throw InvalidArgument(what + ": empty list");
    return out;
}

/// One value broadcast to all modes, or exactly three.
std::array<double, 3> per_mode(const std::string& s, const std::string& what) {
    const auto v = parse_reals(s, what);
    if (v.size() == 1) return {v[0], v[0], v[0]};
    if (v.size() == 3) return {v[0], v[1], v[2]};
    throw InvalidArgument(what + ": give one value or three comma-separated values");
}

/// "a-b" (inclusive) or "a,b,c".
std::vector<Index> parse_ranks(const std::string& s) {
    std::vector<Index> out;
    const auto dash = s.find('-');
    if (dash != std::string::npos && s.find(',') == std::string::npos) {
        const Index lo = parse_index(s.substr(0, dash), "--ranks");
        const Index hi = parse_index(s.substr(dash + 1), "--ranks");
        if (lo < 1 || hi < lo) throw InvalidArgument("--ranks: need 1 <= lo <= hi");
        for (Index k = lo; k <= hi; ++k) out.push_back(k);
    } else {
        for (const auto& tok : split(s, ',')) out.push_back(parse_index(tok, "--ranks"));
    }
    if (out.empty()) throw InvalidArgument("--ranks: empty range");
    return out;
}

Dims parse_dims(const std::string& s) {
    const auto parts = split(s, ',');
    if (parts.size() != 3) throw InvalidArgument("--dims: expected I,J,T");
    Dims d(parse_index(parts[0], "--dims"), parse_index(parts[1], "--dims"), parse_index(parts[2], "--dims"));
    if (!d.valid()) throw InvalidArgument("--dims: dimensions must be positive");
    return d;
}

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path.string());
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw Error("sha256: init failed");
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), digest, &len);
    std::ostringstream hex;
    for (unsigned int n = 0; n < len; ++n) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[n]);
    return hex.str();
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    return out;
}

// -- shared option groups ------------------------------------------------------

struct SolverFlags {
    Index rank = 10;
    std::string lambda = "0";
    std::string rho = "1";
    double lambda_d = 1.0;
    double eps = 1e-4;
    int max_iters = 500;
    std::uint64_t seed = 0;
    std::string dict = "id,id,id";
    std::string dict_file;

    void add(CLI::App* app, bool with_dict = true) {
        app->add_option("--rank", rank, "decomposition rank k")->capture_default_str();
        app->add_option("--lambda", lambda, "l1 weights, one value or l1,l2,l3")->capture_default_str();
        app->add_option("--rho", rho, "ADMM penalties, one value or r1,r2,r3")->capture_default_str();
        app->add_option("--lambda-d", lambda_d, "weight of observed cells in the imputation update")
            ->capture_default_str();
        app->add_option("--eps", eps, "stop when the objective changes by at most this")->capture_default_str();
        app->add_option("--max-iters", max_iters)->capture_default_str();
        app->add_option("--seed", seed, "initialization seed")->capture_default_str();
        if (with_dict) {
            app->add_option("--dict", dict, "dictionary specs m1,m2,m3 (gft:FILE[:N], gftn:..., ram:P, spline:K[:D], id)")
                ->capture_default_str();
            app->add_option("--dict-file", dict_file, "file whose first line holds the --dict value");
        }
    }

    [[nodiscard]] SolverConfig config() const {
        SolverConfig cfg;
        cfg.rank = rank;
        cfg.lambda = per_mode(lambda, "--lambda");
        cfg.rho = per_mode(rho, "--rho");
        cfg.lambda_d = lambda_d;
        cfg.epsilon = eps;
        cfg.max_iters = max_iters;
        cfg.seed = seed;
        cfg.validate();
        return cfg;
    }

    [[nodiscard]] std::string dict_specs() const {
        if (dict_file.empty()) return dict;
        std::ifstream in(dict_file);
        if (!in) throw ParseError("cannot open " + dict_file);
        std::string line;
        while (std::getline(in, line))
            if (!line.empty() && line.front() != '#') return line;
        throw ParseError(dict_file + ": no dictionary line");
    }

    [[nodiscard]] std::array<Dictionary, 3> dictionaries(const Dims& dims) const {
        const auto specs = split(dict_specs(), ',');
        if (specs.size() != 3) throw InvalidArgument("--dict: expected three comma-separated specs");
        return {build_dictionary(specs[0], dims[0]), build_dictionary(specs[1], dims[1]),
                build_dictionary(specs[2], dims[2])};
    }
};

struct OutputFlags {
    std::string out;
    std::string manifest;
    bool no_timing = false;

    void add(CLI::App* app, const std::string& out_help) {
        app->add_option("--out", out, out_help);
        app->add_option("--manifest", manifest, "manifest path (default: <out>.manifest.json or mdtd-manifest.json)");
        app->add_flag("--no-timing", no_timing, "report 0 for all timings so outputs are reproducible");
    }

    [[nodiscard]] double seconds(double s) const { return no_timing ? 0.0 : s; }
};

class Manifest {
public:
    Manifest(std::string command, const std::vector<std::string>& args) {
        doc_["command"] = std::move(command);
        doc_["argv"] = args;
        doc_["inputs"] = json::object();
        doc_["outputs"] = json::array();
        doc_["metrics"] = json::object();
    }

    void input(const std::string& path) {
        if (!path.empty()) doc_["inputs"][path] = sha256_file(path);
    }
    void output(const std::string& path) {
        if (!path.empty()) doc_["outputs"].push_back(path);
    }
    json& metrics() { return doc_["metrics"]; }
    json& operator[](const char* key) { return doc_[key]; }

    void write(const OutputFlags& flags, const CLI::App& app, double wall_seconds) {
        doc_["resolved_config"] = app.config_to_str(true, false);
        doc_["wall_seconds"] = flags.seconds(wall_seconds);
        fs::path path = flags.manifest;
        if (path.empty()) path = flags.out.empty() ? fs::path("mdtd-manifest.json") : fs::path(flags.out + ".manifest.json");
        auto out = open_out(path);
        out << doc_.dump(2) << '\n';
    }

private:
    json doc_;
};

/// Writes to the --out file when given, else to `fallback`.
class Sink {
public:
    Sink(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
        if (!path.empty()) {
            file_ = open_out(path);
            stream_ = &file_;
        }
    }
    std::ostream& operator*() { return *stream_; }

private:
    std::ofstream file_;
    std::ostream* stream_;
};

using Clock = std::chrono::steady_clock;

double elapsed(Clock::time_point start) { return std::chrono::duration<double>(Clock::now() - start).count(); }

// -- gen -------------------------------------------------------------------------

struct GenCmd {
    std::string out_dir;
    std::string dims = "200,300,400";
    std::string atoms = "50,30";
    int max_period = 10;
    Index rank = 10;
    double fraction = 0.75;
    std::string snr = "20";
    int communities = 5;
    std::uint64_t seed = 0;
    double missing_fraction = 0.0;
    std::string manifest;

    void add(CLI::App* app) {
        app->add_option("--out", out_dir, "output directory")->required();
        app->add_option("--dims", dims, "I,J,T")->capture_default_str();
        app->add_option("--atoms", atoms, "GFT atoms for modes 1 and 2")->capture_default_str();
        app->add_option("--max-period", max_period)->capture_default_str();
        app->add_option("--rank", rank)->capture_default_str();
        app->add_option("--fraction", fraction, "nonzero fraction of each code column")->capture_default_str();
        app->add_option("--snr", snr, "noise level in dB, or 'none'")->capture_default_str();
        app->add_option("--communities", communities)->capture_default_str();
        app->add_option("--seed", seed)->capture_default_str();
        app->add_option("--missing-fraction", missing_fraction, "also write a random missing-cell list")
            ->capture_default_str();
        app->add_option("--manifest", manifest);
    }

    int run(const CLI::App& app, const std::vector<std::string>& args, std::ostream& out) const {
        const auto start = Clock::now();
        SynthConfig cfg;
        cfg.dims = parse_dims(dims);
        const auto a = split(atoms, ',');
        if (a.size() != 2) throw InvalidArgument("--atoms: expected two values");
        cfg.atoms = {parse_index(a[0], "--atoms"), parse_index(a[1], "--atoms")};
        cfg.max_period = max_period;
        cfg.rank = rank;
        cfg.nonzero_fraction = fraction;
        if (snr == "none") cfg.snr_db.reset();
        else cfg.snr_db = parse_real(snr, "--snr");
        cfg.communities = communities;
        cfg.seed = seed;
        const GroundTruth gt = generate(cfg);

        const fs::path dir(out_dir);
        fs::create_directories(dir);
        std::vector<std::string> written;
        auto emit = [&](const fs::path& p) { written.push_back(p.string()); };
        io::write_tensor(dir / "tensor.txt", gt.noisy);
        emit(dir / "tensor.txt");
        io::write_tensor(dir / "noiseless.txt", gt.noiseless);
        emit(dir / "noiseless.txt");
        std::string specs;
        for (int m = 0; m < 2; ++m) {
            const fs::path g = dir / ("graph" + std::to_string(m + 1) + ".txt");
            write_graph(g, gt.graphs[m]);
            emit(g);
            specs += "gft:" + g.string() + ":" + std::to_string(cfg.atoms[m]) + ",";
        }
        specs += "ram:" + std::to_string(cfg.max_period);
        {
            auto f = open_out(dir / "dicts.txt");
            f << specs << '\n';
            emit(dir / "dicts.txt");
        }
        for (int m = 0; m < 3; ++m) {
            const fs::path c = dir / ("codes" + std::to_string(m + 1) + ".txt");
            io::write_matrix(c, gt.codes[m]);
            emit(c);
        }
        if (missing_fraction > 0.0) {
            const Mask mask = make_mask(cfg.dims, missing_fraction, seed + 1);
            const io::IndexList list{cfg.dims, mask.missing_indices()};
            io::write_index_list(dir / "missing.txt", list);
            emit(dir / "missing.txt");
            std::vector<SparseEntry> kept;
            for (Index t = 0; t < cfg.dims[2]; ++t)
                for (Index j = 0; j < cfg.dims[1]; ++j)
                    for (Index i = 0; i < cfg.dims[0]; ++i)
                        if (mask.observed(Index3{i, j, t})) kept.push_back({{i, j, t}, gt.noisy(i, j, t)});
            io::write_tensor(dir / "observed.txt", SparseTensor3(cfg.dims, std::move(kept)));
            emit(dir / "observed.txt");
        }

        Manifest manifest("gen", args);
        json truth;
        truth["dims"] = {cfg.dims[0], cfg.dims[1], cfg.dims[2]};
        truth["rank"] = cfg.rank;
        truth["atoms"] = {gt.dicts[0].atom_count(), gt.dicts[1].atom_count(), gt.dicts[2].atom_count()};
        truth["snr_db"] = cfg.snr_db ? json(*cfg.snr_db) : json(nullptr);
        truth["snr_unit"] = "dB";
        truth["noise_variance"] = gt.noise_variance;
        truth["signal_squared_norm"] = gt.noiseless.squared_norm();
        truth["dictionaries"] = specs;
        {
            auto f = open_out(dir / "truth.json");
            f << truth.dump(2) << '\n';
            emit(dir / "truth.json");
        }
        for (const auto& w : written) manifest.output(w);
        manifest["seed"] = seed;
        manifest.metrics() = truth;
        OutputFlags flags;
        flags.manifest = manifest_path(dir);
        flags.no_timing = true;  // generated files never depend on timing
        manifest.write(flags, app, elapsed(start));
        out << "wrote " << written.size() << " files to " << dir.string() << '\n';
        return 0;
    }

    [[nodiscard]] std::string manifest_path(const fs::path& dir) const {
        return manifest.empty() ? (dir / "manifest.json").string() : manifest;
    }
};

// -- decompose -------------------------------------------------------------------

struct DecomposeCmd {
    std::string input;
    std::string model;
    std::string sweep;
    bool sparse = false;
    SolverFlags solver;
    OutputFlags output;

    void add(CLI::App* app) {
        app->add_option("--input", input, "tensor file (dims header, then 1-based 'i j t value' lines)")->required();
        solver.add(app);
        app->add_option("--model", model, "write the model dump (JSON) here");
        app->add_option("--sweep-lambda", sweep, "comma-separated lambda grid applied to all modes");
        app->add_flag("--sparse", sparse, "keep the input in coordinate form");
        output.add(app, "metrics CSV path (default stdout)");
    }

    int run(const CLI::App& app, const std::vector<std::string>& args, std::ostream& out) const {
        const auto start = Clock::now();
        Manifest manifest("decompose", args);
        manifest.input(input);
        const SparseTensor3 coo = io::read_tensor(input);
        const Tensor3 dense = sparse ? Tensor3() : coo.densify();
        const auto dicts = solver.dictionaries(coo.dims());
        SolverConfig cfg = solver.config();
        manifest["seed"] = cfg.seed;

        auto run_once = [&](const SolverConfig& c) {
            return sparse ? solve(coo, {}, dicts, c) : solve(dense, nullptr, dicts, c);
        };

        Sink sink(output.out, out);
        if (sweep.empty()) {
            const auto result = run_once(cfg);
            const FitReport& r = result.report;
            *sink << "sse,nnz,fit,iters,seconds\n"
                  << format_double(r.sse) << ',' << r.nnz << ',' << format_double(r.fit) << ',' << r.iterations << ','
                  << format_double(output.seconds(r.seconds)) << '\n';
            manifest.metrics() = {{"sse", r.sse}, {"nnz", r.nnz}, {"fit", r.fit}, {"iterations", r.iterations},
                                  {"converged", r.converged}};
            if (!model.empty()) {
                save_model(fs::path(model), result.model);
                manifest.output(model);
            }
        } else {
            if (!model.empty()) throw InvalidArgument("--model cannot be combined with --sweep-lambda");
            *sink << "lambda,sse,nnz,fit,iters,seconds\n";
            json rows = json::array();
            for (double lam : parse_reals(sweep, "--sweep-lambda")) {
                SolverConfig c = cfg;
                c.lambda = {lam, lam, lam};
                c.validate();
                const auto r = run_once(c).report;
                *sink << format_double(lam) << ',' << format_double(r.sse) << ',' << r.nnz << ','
                      << format_double(r.fit) << ',' << r.iterations << ',' << format_double(output.seconds(r.seconds))
                      << '\n';
                rows.push_back({{"lambda", lam}, {"sse", r.sse}, {"nnz", r.nnz}, {"fit", r.fit}});
            }
            manifest.metrics() = {{"sweep", rows}};
        }
        manifest.output(output.out);
        manifest.write(output, app, elapsed(start));
        return 0;
    }
};

// -- impute ----------------------------------------------------------------------

struct ImputeCmd {
    std::string input;
    std::string missing;
    std::string mode = "dense";
    std::string truth;
    std::string values;
    SolverFlags solver;
    OutputFlags output;

    void add(CLI::App* app) {
        app->add_option("--input", input, "tensor file")->required();
        app->add_option("--missing", missing, "missing-cell list (dims header, then 1-based 'i j t' lines)")
            ->required();
        app->add_option("--impute", mode, "dense or sparse")
            ->check(CLI::IsMember({"dense", "sparse"}))
            ->capture_default_str();
        app->add_option("--truth", truth, "tensor holding the true values of the missing cells");
        app->add_option("--values", values, "write imputed cells here (tensor file format)");
        solver.add(app);
        output.add(app, "metrics CSV path (default stdout)");
    }

    int run(const CLI::App& app, const std::vector<std::string>& args, std::ostream& out) const {
        const auto start = Clock::now();
        Manifest manifest("impute", args);
        manifest.input(input);
        manifest.input(missing);
        manifest.input(truth);
        const SparseTensor3 coo = io::read_tensor(input);
        const io::IndexList list = io::read_index_list(missing);
        if (!(list.dims == coo.dims())) throw ShapeError("missing-cell list dimensions differ from the tensor");
        const auto dicts = solver.dictionaries(coo.dims());
        SolverConfig cfg = solver.config();
        manifest["seed"] = cfg.seed;

        SolveResult result;
        if (mode == "dense") {
            cfg.impute = ImputeMode::dense;
            const Mask mask = Mask::from_missing(coo.dims(), list.cells);
            result = solve(coo.densify(), &mask, dicts, cfg);
        } else {
            cfg.impute = ImputeMode::sparse;
            result = solve(coo, list.cells, dicts, cfg);
        }
        const auto imputed = result.model.reconstruct_codes_at(list.cells);

        std::optional<double> mse;
        if (!truth.empty()) {
            const SparseTensor3 t = io::read_tensor(truth);
            if (!(t.dims() == coo.dims())) throw ShapeError("truth dimensions differ from the tensor");
            const Tensor3 td = t.densify();
            double acc = 0.0;
            for (std::size_t n = 0; n < imputed.size(); ++n) {
                const auto& c = list.cells[n];
                const double d = td(c.i, c.j, c.t) - imputed[n];
                acc += d * d;
            }
            mse = imputed.empty() ? 0.0 : acc / static_cast<double>(imputed.size());
        }
        if (!values.empty()) {
            std::vector<SparseEntry> entries;
            entries.reserve(imputed.size());
            for (std::size_t n = 0; n < imputed.size(); ++n) entries.push_back({list.cells[n], imputed[n]});
            io::write_tensor(fs::path(values), SparseTensor3(coo.dims(), std::move(entries)));
            manifest.output(values);
        }

        const FitReport& r = result.report;
        Sink sink(output.out, out);
        *sink << "missing,mse,sse,nnz,fit,iters,seconds\n"
              << list.cells.size() << ',' << (mse ? format_double(*mse) : std::string()) << ',' << format_double(r.sse)
              << ',' << r.nnz << ',' << format_double(r.fit) << ',' << r.iterations << ','
              << format_double(output.seconds(r.seconds)) << '\n';
        manifest.metrics() = {{"missing", list.cells.size()}, {"mse", mse ? json(*mse) : json(nullptr)},
                              {"sse", r.sse},   {"nnz", r.nnz},
                              {"fit", r.fit},   {"iterations", r.iterations}};
        manifest.output(output.out);
        manifest.write(output, app, elapsed(start));
        return 0;
    }
};

// -- rank ------------------------------------------------------------------------

struct RankCmd {
    std::string input;
    std::string ranks;
    std::string selection = "threshold";
    double threshold = 90.0;
    SolverFlags solver;
    OutputFlags output;

    void add(CLI::App* app) {
        app->add_option("--input", input, "tensor file")->required();
        app->add_option("--ranks", ranks, "candidate ranks, 'lo-hi' or 'k1,k2,...'")->required();
        app->add_option("--selection", selection, "threshold (largest rank scoring >= --threshold) or max")
            ->check(CLI::IsMember({"threshold", "max"}))
            ->capture_default_str();
        app->add_option("--threshold", threshold)->capture_default_str();
        solver.add(app);
        output.add(app, "per-rank CSV path (default stdout)");
    }

    int run(const CLI::App& app, const std::vector<std::string>& args, std::ostream& out) const {
        const auto start = Clock::now();
        Manifest manifest("rank", args);
        manifest.input(input);
        const Tensor3 x = io::read_dense_tensor(input);
        const auto dicts = solver.dictionaries(x.dims());
        const SolverConfig cfg = solver.config();
        manifest["seed"] = cfg.seed;
        RankScanConfig scan;
        scan.selection = selection == "max" ? RankSelection::max : RankSelection::threshold;
        scan.threshold = threshold;
        const auto result = estimate_rank(x, dicts, parse_ranks(ranks), cfg, scan);

        Sink sink(output.out, out);
        *sink << "rank,score,sse,nnz,seconds\n";
        json rows = json::array();
        for (const auto& c : result.candidates) {
            *sink << c.rank << ',' << format_double(c.score) << ',' << format_double(c.sse) << ',' << c.nnz << ','
                  << format_double(output.seconds(c.seconds)) << '\n';
            rows.push_back({{"rank", c.rank}, {"score", c.score}});
        }
        out << "chosen rank: " << result.chosen << '\n';
        manifest.metrics() = {{"chosen_rank", result.chosen}, {"scores", rows}, {"warnings", result.warnings}};
        manifest.output(output.out);
        manifest.write(output, app, elapsed(start));
        return 0;
    }
};

// -- bench -----------------------------------------------------------------------

struct BenchCmd {
    std::string vary = "T";
    std::string grid;
    std::string dims = "50,60,80";
    std::string atoms = "15,10";
    int max_period = 5;
    int communities = 5;
    Index true_rank = 5;
    SolverFlags solver;
    OutputFlags output;

    void add(CLI::App* app) {
        app->add_option("--vary", vary, "T (temporal length) or nodes (both graph modes)")
            ->check(CLI::IsMember({"T", "nodes"}))
            ->capture_default_str();
        app->add_option("--grid", grid, "comma-separated sizes")->required();
        app->add_option("--dims", dims, "base I,J,T")->capture_default_str();
        app->add_option("--atoms", atoms)->capture_default_str();
        app->add_option("--max-period", max_period)->capture_default_str();
        app->add_option("--communities", communities)->capture_default_str();
        app->add_option("--true-rank", true_rank, "rank of the generated tensor")->capture_default_str();
        solver.add(app, false);
        output.add(app, "CSV path (default stdout)");
    }

    int run(const CLI::App& app, const std::vector<std::string>& args, std::ostream& out) const {
        const auto start = Clock::now();
        Manifest manifest("bench", args);
        const SolverConfig cfg = solver.config();
        manifest["seed"] = cfg.seed;
        const Dims base = parse_dims(dims);
        const auto a = split(atoms, ',');
        if (a.size() != 2) throw InvalidArgument("--atoms: expected two values");

        Sink sink(output.out, out);
        *sink << "nodes_or_T,gigabytes,seconds,iters\n";
        json rows = json::array();
        for (const auto& tok : split(grid, ',')) {
            const Index size = parse_index(tok, "--grid");
            SynthConfig sc;
            sc.dims = vary == "T" ? Dims(base[0], base[1], size) : Dims(size, size, base[2]);
            sc.atoms = {std::min(parse_index(a[0], "--atoms"), sc.dims[0]),
                        std::min(parse_index(a[1], "--atoms"), sc.dims[1])};
            sc.max_period = max_period;
            sc.rank = true_rank;
            sc.communities = communities;
            sc.seed = cfg.seed;
            const GroundTruth gt = generate(sc);
            const auto r = solve(gt.noisy, nullptr, gt.dicts, cfg).report;
            const double gb = static_cast<double>(sc.dims.count()) * sizeof(double) / 1e9;
            *sink << size << ',' << format_double(gb) << ',' << format_double(output.seconds(r.seconds)) << ','
                  << r.iterations << '\n';
            rows.push_back({{"size", size}, {"gigabytes", gb}, {"iterations", r.iterations}});
        }
        manifest.metrics() = {{"rows", rows}};
        manifest.output(output.out);
        manifest.write(output, app, elapsed(start));
        return 0;
    }
};

/// Fills options the command line left unset from a key=value file.
/// Subcommand options are not reached by CLI11's own config handling.
void apply_config(CLI::App* sub, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CLI::FileError::Missing(path);
    for (const auto& item : CLI::ConfigINI().from_config(in)) {
        if (item.name == "++" || item.name == "--") continue;
        CLI::Option* opt = sub->get_option_no_throw("--" + item.name);
        if (opt == nullptr || item.name == "config") {
            throw CLI::ConfigError::Extras(path + ": unknown key '" + item.name + "'");
        }
        if (opt->count() > 0) continue;
        for (const auto& v : item.inputs) opt->add_result(v);
        opt->run_callback();
    }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multi-dictionary tensor decomposition", "mdtd"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    GenCmd gen;
    DecomposeCmd decompose;
    ImputeCmd impute;
    RankCmd rank;
    BenchCmd bench;
    auto* gen_app = app.add_subcommand("gen", "generate the synthetic benchmark");
    auto* dec_app = app.add_subcommand("decompose", "fit a model and report sse,nnz,fit,iters,seconds");
    auto* imp_app = app.add_subcommand("impute", "fill missing cells");
    auto* rank_app = app.add_subcommand("rank", "core-consistency rank scan");
    auto* bench_app = app.add_subcommand("bench", "time the solver over a size grid");
    gen.add(gen_app);
    decompose.add(dec_app);
    impute.add(imp_app);
    rank.add(rank_app);
    bench.add(bench_app);
    std::string config_file;
    for (auto* sub : {gen_app, dec_app, imp_app, rank_app, bench_app})
        sub->add_option("--config", config_file, "key=value file; command-line flags win");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
        for (auto* sub : {gen_app, dec_app, imp_app, rank_app, bench_app})
            if (*sub && !config_file.empty()) apply_config(sub, config_file);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (*gen_app) return gen.run(*gen_app, args, out);
        if (*dec_app) return decompose.run(*dec_app, args, out);
        if (*imp_app) return impute.run(*imp_app, args, out);
        if (*rank_app) return rank.run(*rank_app, args, out);
        if (*bench_app) return bench.run(*bench_app, args, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

}  // namespace mdtd::cli
