#include "mdtd/error.hpp"
#include "mdtd/solver.hpp"

#include <json.hpp>

#include <fstream>
#include <string>

namespace mdtd {

namespace {

using nlohmann::json;

constexpr const char* kFormat = "mdtd-model";
constexpr int kVersion = 1;

json parse_document(std::istream& in) {
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ParseError(std::string("model: ") + e.what());
    }
    if (!doc.is_object() || doc.value("format", "") != kFormat) throw ParseError("model: not an mdtd-model document");
    if (doc.value("version", 0) != kVersion) throw ParseError("model: unsupported version");
    return doc;
}

MdtdModel fill_codes(const json& doc, std::array<Dictionary, 3> dicts) {
    try {
        const auto dims = doc.at("dims").get<std::array<Index, 3>>();
        const Index rank = doc.at("rank").get<Index>();
        const auto scale = doc.at("scale").get<std::vector<double>>();
        if (rank < 1 || static_cast<Index>(scale.size()) != rank) throw ParseError("model: scale length != rank");
        MdtdModel model;
        model.scale = Eigen::Map<const Vector>(scale.data(), rank);
        const auto& modes = doc.at("modes");
        if (!modes.is_array() || modes.size() != 3) throw ParseError("model: expected three modes");
        for (std::size_t m = 0; m < 3; ++m) {
            const auto& entry = modes[m];
            const Index atoms = entry.at("atoms").get<Index>();
            if (dicts[m].length() != dims[m] || dicts[m].atom_count() != atoms) {
                throw ShapeError("model: dictionary for mode " + std::to_string(m + 1) + " does not match the dump");
            }
            Matrix z = Matrix::Zero(atoms, rank);
            for (const auto& triplet : entry.at("codes")) {
                const Index r = triplet.at(0).get<Index>();
                const Index c = triplet.at(1).get<Index>();
                if (r < 0 || r >= atoms || c < 0 || c >= rank) throw ParseError("model: code index out of range");
                z(r, c) = triplet.at(2).get<double>();
            }
            model.y[m] = z;
            model.z[m] = z;
            model.gamma[m] = Matrix::Zero(atoms, rank);
        }
        model.dicts = std::move(dicts);
        return model;
    } catch (const json::exception& e) {
        throw ParseError(std::string("model: ") + e.what());
    }
}

}  // namespace

void save_model(std::ostream& out, const MdtdModel& model) {
    json doc;
    doc["format"] = kFormat;
    doc["version"] = kVersion;
    const Dims d = model.dims();
    doc["dims"] = {d[0], d[1], d[2]};
    doc["rank"] = model.rank();
    doc["scale"] = std::vector<double>(model.scale.data(), model.scale.data() + model.scale.size());
    json modes = json::array();
    for (int m = 0; m < 3; ++m) {
        json codes = json::array();
        const Matrix& z = model.z[m];
        for (Index c = 0; c < z.cols(); ++c)
            for (Index r = 0; r < z.rows(); ++r)
                if (z(r, c) != 0.0) codes.push_back({r, c, z(r, c)});
        modes.push_back({{"dictionary", model.dicts[m].spec}, {"atoms", model.dicts[m].atom_count()}, {"codes", codes}});
    }
    doc["modes"] = modes;
    out << doc.dump(1) << '\n';
}

void save_model(const std::filesystem::path& path, const MdtdModel& model) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    save_model(out, model);
}

MdtdModel load_model(std::istream& in) {
    const json doc = parse_document(in);
    std::array<Dictionary, 3> dicts;
    try {
        const auto dims = doc.at("dims").get<std::array<Index, 3>>();
        for (std::size_t m = 0; m < 3; ++m) {
            const auto spec = doc.at("modes").at(m).at("dictionary").get<std::string>();
            if (spec.empty()) throw ParseError("model: mode " + std::to_string(m + 1) + " has no dictionary spec");
            dicts[m] = build_dictionary(spec, dims[m]);
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("model: ") + e.what());
    }
    return fill_codes(doc, std::move(dicts));
}

MdtdModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    return load_model(in);
}

MdtdModel load_model(std::istream& in, std::array<Dictionary, 3> dicts) {
    return fill_codes(parse_document(in), std::move(dicts));
}

}  // namespace mdtd
