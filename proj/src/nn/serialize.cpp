#include "pairvoice/nn/serialize.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pairvoice/csv.hpp"

namespace pairvoice::nn {

using nlohmann::json;

namespace {

json matrix_json(const Matrix& m) {
    return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.storage()}};
}

Matrix matrix_from(const json& j) {
    Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
    const auto data = j.at("data").get<std::vector<double>>();
    if (data.size() != m.size()) throw SchemaError("model: parameter array length does not match its shape");
    m.storage() = data;
    return m;
}

json params_json(const ConstParamList& params) {
    json arr = json::array();
    for (const auto* p : params) arr.push_back(matrix_json(*p));
    return arr;
}

void load_params(const json& arr, const ParamList& params) {
    if (!arr.is_array() || arr.size() != params.size()) throw SchemaError("model: wrong number of parameter arrays");
    for (std::size_t i = 0; i < params.size(); ++i) {
        Matrix m = matrix_from(arr[i]);
        if (!m.same_shape(*params[i])) throw SchemaError("model: parameter shape does not match config");
        *params[i] = std::move(m);
    }
}

json parse_doc(std::string_view text, std::string_view kind) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw SchemaError(std::string("model: invalid JSON: ") + e.what());
    }
    if (doc.value("schema_version", -1) != kModelSchemaVersion)
        throw SchemaError("model: unsupported schema_version");
    if (doc.value("model", std::string()) != kind) throw SchemaError("model: expected a '" + std::string(kind) + "' document");
    return doc;
}

template <class F>
auto guarded(F&& f) {
    try {
        return f();
    } catch (const json::exception& e) {
        throw SchemaError(std::string("model: ") + e.what());
    }
}

}  // namespace

std::string to_json(const DenseNet3& net) {
    json doc;
    doc["schema_version"] = kModelSchemaVersion;
    doc["model"] = "dense3";
    doc["config"] = {{"input_dim", net.input_dim()}, {"hidden1", net.hidden1()}, {"hidden2", net.hidden2()},
                     {"activation", "relu"}, {"seed", net.seed()}};
    doc["parameters"] = params_json(net.parameters());
    return doc.dump(1);
}

DenseNet3 dense_from_json(std::string_view text) {
    return guarded([&] {
        const json doc = parse_doc(text, "dense3");
        const auto& c = doc.at("config");
        DenseNet3 net = DenseNet3::zeros(c.at("input_dim").get<std::size_t>(), c.at("hidden1").get<std::size_t>(),
                                         c.at("hidden2").get<std::size_t>(), c.value("seed", std::uint64_t{0}));
        load_params(doc.at("parameters"), net.parameters());
        return net;
    });
}

std::string to_json(const AffModel& model) {
    json doc;
    doc["schema_version"] = kModelSchemaVersion;
    doc["model"] = "aff";
    doc["config"] = {{"d_freq", model.aff().d_freq()},
                     {"d_new", model.aff().d_new()},
                     {"trim_halfwidth_bins", model.aff().trim_halfwidth_bins},
                     {"trim_period_epochs", model.aff().trim_period_epochs},
                     {"encoder", to_string(model.encoder().kind())},
                     {"ff_dim", model.encoder().ff_dim()},
                     {"head_seed", model.head_seed()}};
    doc["parameters"] = params_json(model.parameters());
    return doc.dump(1);
}

AffModel aff_model_from_json(std::string_view text) {
    return guarded([&] {
        const json doc = parse_doc(text, "aff");
        const auto& c = doc.at("config");
        const auto d_freq = c.at("d_freq").get<std::size_t>();
        const auto d_new = c.at("d_new").get<std::size_t>();
        AffMatrix aff{Matrix(d_freq, d_new), c.at("trim_halfwidth_bins").get<int>(),
                      c.at("trim_period_epochs").get<int>()};
        SeqEncoder enc = SeqEncoder::zeros(parse_encoder_kind(c.at("encoder").get<std::string>()), d_new,
                                           c.at("ff_dim").get<std::size_t>());
        AffModel model = AffModel::from_parts(std::move(aff), std::move(enc), Matrix(d_new, 2), Matrix(1, 2),
                                              c.at("head_seed").get<std::uint64_t>());
        load_params(doc.at("parameters"), model.parameters());
        return model;
    });
}

void save_text(const std::filesystem::path& path, const std::string& text) { csv::write_text(path, text); }

std::string load_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace pairvoice::nn
