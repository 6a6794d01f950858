#include "hopular/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

#include "hopular/errors.hpp"
#include "hopular/harness.hpp"

namespace hopular {

namespace {

constexpr int kFormatVersion = 1;

nlohmann::json tensor_to_json(const Tensor& t) {
    nlohmann::json j;
    j["shape"] = t.shape();
    std::vector<double> data(t.data(), t.data() + t.size());
    j["data"] = data;
    return j;
}

Tensor tensor_from_json(const nlohmann::json& j) {
    const std::vector<int64_t> shape = j.at("shape").get<std::vector<int64_t>>();
    std::vector<double> data = j.at("data").get<std::vector<double>>();
    Tensor t = Tensor::zeros(shape);
    if (t.size() != static_cast<int64_t>(data.size()))
        throw ParseError("checkpoint tensor data does not match its shape");
    for (int64_t i = 0; i < t.size(); ++i) t[i] = data[static_cast<size_t>(i)];
    return t;
}

}  // namespace

void save_checkpoint(const std::string& path, const CheckpointBundle& bundle) {
    nlohmann::json j;
    j["format"] = "hopular-checkpoint";
    j["format_version"] = kFormatVersion;
    j["code_version"] = kVersion;
    j["schema_text"] = bundle.model.schema.to_text();
    j["schema_fingerprint"] = bundle.schema_fingerprint;
    j["data_fingerprint"] = bundle.data_fingerprint;
    j["run_config"] = bundle.run_config_json;

    const HyperParams& hp = bundle.model.hp;
    j["hyperparams"] = {
        {"blocks", hp.blocks},
        {"heads", hp.heads},
        {"embed_dim", hp.embed_dim},
        {"beta_scale", hp.beta_scale},
        {"dropout_input", hp.dropout_input},
        {"dropout_hidden", hp.dropout_hidden},
        {"dropout_output", hp.dropout_output},
        {"detach_memory", hp.detach_memory},
        {"drop_self_column", hp.drop_self_column},
    };

    j["normalization"] = {{"mean", bundle.mean}, {"stddev", bundle.stddev}};
    j["category_tokens"] = bundle.category_tokens;
    j["split_of_row"] = bundle.split_of_row;

    nlohmann::json params = nlohmann::json::object();
    bundle.model.visit_params([&params](const std::string& name, const Tensor& t) {
        params[name] = tensor_to_json(t);
    });
    j["params"] = params;

    std::ofstream out(path);
    if (!out) throw ParseError("cannot write checkpoint: " + path);
    out << j.dump() << "\n";
}

CheckpointBundle load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open checkpoint: " + path);
    nlohmann::json j;
    in >> j;
    if (j.value("format", "") != "hopular-checkpoint")
        throw ParseError("not a hopular checkpoint: " + path);
    if (j.value("format_version", -1) != kFormatVersion)
        throw ParseError("unsupported checkpoint format version");

    CheckpointBundle bundle;
    bundle.schema_fingerprint = j.value("schema_fingerprint", "");
    bundle.data_fingerprint = j.value("data_fingerprint", "");
    bundle.run_config_json = j.value("run_config", "");

    const TableSchema schema = TableSchema::parse_text(j.at("schema_text").get<std::string>());
    HyperParams hp;
    const nlohmann::json& hj = j.at("hyperparams");
    hp.blocks = hj.at("blocks").get<int64_t>();
    hp.heads = hj.at("heads").get<int64_t>();
    hp.embed_dim = hj.at("embed_dim").get<int64_t>();
    hp.beta_scale = hj.at("beta_scale").get<double>();
    hp.dropout_input = hj.at("dropout_input").get<double>();
    hp.dropout_hidden = hj.at("dropout_hidden").get<double>();
    hp.dropout_output = hj.at("dropout_output").get<double>();
    hp.detach_memory = hj.at("detach_memory").get<bool>();
    hp.drop_self_column = hj.at("drop_self_column").get<bool>();

    Rng init_rng(0);  // overwritten below by stored parameter values
    bundle.model = make_model(schema, hp, init_rng);
    const nlohmann::json& params = j.at("params");
    bundle.model.visit_params([&params](const std::string& name, Tensor& t) {
        if (!params.contains(name)) throw ParseError("checkpoint missing parameter " + name);
        Tensor loaded = tensor_from_json(params.at(name));
        if (!loaded.same_shape(t))
            throw ParseError("checkpoint parameter " + name + " has shape " +
                             loaded.shape_string() + ", expected " + t.shape_string());
        t = std::move(loaded);
    });

    bundle.mean = j.at("normalization").at("mean").get<std::vector<double>>();
    bundle.stddev = j.at("normalization").at("stddev").get<std::vector<double>>();
    bundle.category_tokens =
        j.at("category_tokens").get<std::vector<std::vector<std::string>>>();
    bundle.split_of_row = j.at("split_of_row").get<std::vector<int>>();
    return bundle;
}

void apply_checkpoint_dataset_state(const CheckpointBundle& bundle, Dataset& ds,
                                    const std::string& data_fingerprint) {
    if (bundle.data_fingerprint != data_fingerprint)
        throw ConfigError("data fingerprint " + data_fingerprint +
                          " does not match checkpoint fingerprint " + bundle.data_fingerprint);
    if (bundle.split_of_row.size() != ds.rows.size())
        throw ConfigError("checkpoint split covers a different number of rows");
    ds.split_of_row = bundle.split_of_row;
    ds.mean = bundle.mean;
    ds.stddev = bundle.stddev;
    ds.category_tokens = bundle.category_tokens;
    ds.has_stats = true;
}

}  // namespace hopular
