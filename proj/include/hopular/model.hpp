#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hopular/autodiff.hpp"
#include "hopular/data.hpp"
#include "hopular/rng.hpp"

namespace hopular {

struct HyperParams {
    int64_t blocks = 4;        // L
    int64_t heads = 8;         // M Hopfield networks per module
    int64_t embed_dim = 16;    // e
    double beta_scale = 1.0;   // softmax scale; effective beta = beta_scale / sqrt(h)
    double dropout_input = 0.1;
    double dropout_hidden = 0.1;
    double dropout_output = 0.01;
    bool detach_memory = false;     // stop gradients through stored patterns
    bool drop_self_column = false;  // remove the query's own memory column instead of re-masking it
};

// Per-attribute embedding. Categorical attributes own a value matrix of
// (cardinality + 2) rows: declared categories, then a "missing" row, then the
// mask-token row. Continuous attributes embed v as scale * v + bias, with a
// separate learned mask-token vector.
struct AttributeEmbedding {
    Tensor value_map;   // categorical only
    Tensor scale;       // continuous only
    Tensor bias;        // continuous only
    Tensor mask_token;  // continuous only
};

struct EmbeddingParams {
    std::vector<AttributeEmbedding> attrs;
    Tensor position;   // d x e
    Tensor type_rows;  // 3 x e: categorical, continuous, target
};

struct HsHeadParams {
    Tensor w_query;   // h x (d*e), applied to the current prediction
    Tensor w_memory;  // h x (d*e), applied to the stored training set
    Tensor w_out;     // (d*e) x h
};

struct HfHeadParams {
    Tensor w_query;   // h x e
    Tensor w_memory;  // h x e
    Tensor w_out;     // e x h
};

struct BlockParams {
    std::vector<HsHeadParams> hs_heads;
    Tensor hs_combine;  // (d*e) x (M * d*e)
    std::vector<HfHeadParams> hf_heads;
    Tensor hf_combine;  // e x (M * e)
};

struct SummarizationParams {
    std::vector<Tensor> weight;  // per attribute: cardinality x e, or 1 x e
    std::vector<Tensor> bias;    // per attribute: cardinality, or 1
};

struct HopularModel {
    TableSchema schema;
    HyperParams hp;
    EmbeddingParams embedding;
    std::vector<BlockParams> blocks;
    SummarizationParams summary;

    int64_t attr_count() const { return schema.attribute_count(); }
    int64_t feature_dim() const { return attr_count() * hp.embed_dim; }
    // h = d*e / M; the division must be exact.
    int64_t hopfield_dim() const;
    double beta_eff() const;

    void visit_params(const std::function<void(const std::string&, Tensor&)>& fn);
    void visit_params(const std::function<void(const std::string&, const Tensor&)>& fn) const;
};

// Builds a model with all parameters drawn uniformly in
// +-sqrt(6 / (fan_in + fan_out)); summarization biases start at zero.
HopularModel make_model(const TableSchema& schema, const HyperParams& hp, Rng& rng);

// One sample prepared for embedding: encoded values after any replacement,
// plus per-attribute mask flags.
struct ModelInput {
    EncodedSample enc;
    std::vector<uint8_t> masked;
};

// Tape-bound mirror of the model parameters.
struct BoundAttribute {
    Var value_map, scale, bias, mask_token;
};
struct BoundHsHead {
    Var w_query, w_memory, w_out;
};
struct BoundHfHead {
    Var w_query, w_memory, w_out;
};
struct BoundBlock {
    std::vector<BoundHsHead> hs_heads;
    Var hs_combine;
    std::vector<BoundHfHead> hf_heads;
    Var hf_combine;
};
struct BoundModel {
    const HopularModel* model = nullptr;
    std::vector<BoundAttribute> attrs;
    Var position, type_rows;
    std::vector<BoundBlock> blocks;
    std::vector<Var> summary_weight, summary_bias;
};

// trainable = leaves (gradients tracked); otherwise constants.
BoundModel bind_model(Tape& tape, const HopularModel& model, bool trainable);

// Binds every parameter as a constant except the leaf_index-th one (in
// visit_params order), which is replaced by `substitute`. Used by the
// per-parameter gradient checker.
BoundModel bind_model_selective(Tape& tape, const HopularModel& model, int64_t leaf_index,
                                Var substitute);

struct ForwardContext {
    Tape* tape = nullptr;
    Rng* rng = nullptr;  // dropout randomness; required when training
    bool training = false;
};

// Embeds one sample: per attribute value/mask embedding + position row +
// type row, concatenated into the d*e prediction vector. No dropout.
Var embed_sample(ForwardContext& ctx, const BoundModel& bound, const ModelInput& input);

// Materialized stored-pattern matrix X in (d*e) x n, targets always masked.
// In train mode the query sample's column carries the query's exact mask
// pattern (or is dropped entirely when hp.drop_self_column is set).
struct TrainQuery {
    int64_t column = -1;     // position of the query within the training inputs
    const ModelInput* query = nullptr;
};
Var build_memory(ForwardContext& ctx, const BoundModel& bound,
                 std::span<const ModelInput> train_inputs,
                 const std::optional<TrainQuery>& train_query);

// Shared per-epoch memory: the embedded training set and, per block and head,
// its projection through that head's memory map.
struct MemoryBase {
    Var x;  // (d*e) x n
    std::vector<std::vector<Var>> projected;  // [block][head] -> h x n
    int64_t count = 0;
};
MemoryBase build_memory_base(ForwardContext& ctx, const BoundModel& bound,
                             std::span<const ModelInput> train_inputs);

// How a forward pass treats the query's own column in the stored memory.
struct SelfHandling {
    int64_t column = -1;  // -1: query not in memory (evaluation)
    bool drop = false;    // drop the column instead of patching it
    Var patch;            // clean embedding of the masked query (patch mode)
};

// Sample-sample retrieval for a single Hopfield network: softmax over the
// n stored samples of W_S W_X X softmax(beta X^T W_X^T W_xi xi).
Var hs_head_forward(ForwardContext& ctx, const BoundHsHead& head, Var xi, Var memory_x,
                    double beta_eff);
// Same computation against a cached projection with self-column handling.
Var hs_head_forward_cached(ForwardContext& ctx, const BoundHsHead& head, Var xi, Var projected,
                           const SelfHandling& self, double beta_eff);

// Concatenated head results combined through the learned projection W_G.
Var hs_module_forward(ForwardContext& ctx, const BoundBlock& block, Var xi, Var memory_x,
                      double beta_eff);
Var hs_module_forward_cached(ForwardContext& ctx, const BoundBlock& block, Var xi,
                             std::span<const Var> projected, const SelfHandling& self,
                             double beta_eff);

// Feature-feature retrieval for a single Hopfield network: column-wise
// softmax over the d stored attribute embeddings of Y, i.e.
// W_F W_Y Y softmax(beta Y^T W_Y^T W_Xi Xi).
Var hf_head_forward(ForwardContext& ctx, const BoundHfHead& head, Var xi_matrix, Var y,
                    double beta_eff);
Var hf_module_forward(ForwardContext& ctx, const BoundBlock& block, Var xi_matrix, Var y,
                      double beta_eff);

// One Hopular block: xi += dropout(Hs(xi)); Xi = reshape(xi);
// Xi += dropout(Hf(Xi)); xi = reshape back.
Var block_forward(ForwardContext& ctx, const BoundBlock& block, Var xi,
                  std::span<const Var> projected, const SelfHandling& self, Var y,
                  const HyperParams& hp, double beta_eff);

struct ForwardResult {
    std::vector<Var> predictions;  // per attribute: logits (categorical) or scalar
    Var clean_embedding;           // pre-dropout d*e embedding of the input
};

// Full pass: embed, L blocks, summarization.
ForwardResult forward(ForwardContext& ctx, const BoundModel& bound, const ModelInput& input,
                      const MemoryBase& memory, int64_t self_column);

std::vector<Var> summarize(ForwardContext& ctx, const BoundModel& bound, Var xi_final);

// Masked model input for one dataset row with only the target hidden
// (the inference-time contract).
ModelInput target_masked_input(const Dataset& ds, int64_t row);

}  // namespace hopular
