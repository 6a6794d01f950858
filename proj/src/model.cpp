#include "hopular/model.hpp"

#include <cmath>

#include "hopular/errors.hpp"

namespace hopular {

namespace {

int64_t type_row_index(const Attribute& attr) {
    if (attr.is_target) return 2;
    return attr.kind == AttrKind::categorical ? 0 : 1;
}

Tensor glorot_uniform(int64_t rows, int64_t cols, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Tensor t = Tensor::matrix(rows, cols);
    for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
    return t;
}

Tensor glorot_uniform_vec(int64_t n, int64_t fan_sum, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_sum));
    Tensor t = Tensor::zeros({n});
    for (int64_t i = 0; i < n; ++i) t[i] = rng.uniform(-bound, bound);
    return t;
}

}  // namespace

int64_t HopularModel::hopfield_dim() const {
    const int64_t de = feature_dim();
    if (hp.heads < 1 || de % hp.heads != 0)
        throw ConfigError("hopfield dimension d*e/M must be an exact integer: d*e = " +
                          std::to_string(de) + ", M = " + std::to_string(hp.heads));
    return de / hp.heads;
}

double HopularModel::beta_eff() const {
    return hp.beta_scale / std::sqrt(static_cast<double>(hopfield_dim()));
}

void HopularModel::visit_params(const std::function<void(const std::string&, Tensor&)>& fn) {
    const int64_t d = attr_count();
    for (int64_t j = 0; j < d; ++j) {
        AttributeEmbedding& a = embedding.attrs[static_cast<size_t>(j)];
        const std::string prefix = "embed.attr" + std::to_string(j) + ".";
        if (schema.attrs[static_cast<size_t>(j)].kind == AttrKind::categorical) {
            fn(prefix + "value_map", a.value_map);
        } else {
            fn(prefix + "scale", a.scale);
            fn(prefix + "bias", a.bias);
            fn(prefix + "mask_token", a.mask_token);
        }
    }
    fn("embed.position", embedding.position);
    fn("embed.type_rows", embedding.type_rows);
    for (size_t b = 0; b < blocks.size(); ++b) {
        BlockParams& blk = blocks[b];
        const std::string bp = "block" + std::to_string(b) + ".";
        for (size_t m = 0; m < blk.hs_heads.size(); ++m) {
            const std::string hp_ = bp + "hs" + std::to_string(m) + ".";
            fn(hp_ + "w_query", blk.hs_heads[m].w_query);
            fn(hp_ + "w_memory", blk.hs_heads[m].w_memory);
            fn(hp_ + "w_out", blk.hs_heads[m].w_out);
        }
        fn(bp + "hs_combine", blk.hs_combine);
        for (size_t m = 0; m < blk.hf_heads.size(); ++m) {
            const std::string hp_ = bp + "hf" + std::to_string(m) + ".";
            fn(hp_ + "w_query", blk.hf_heads[m].w_query);
            fn(hp_ + "w_memory", blk.hf_heads[m].w_memory);
            fn(hp_ + "w_out", blk.hf_heads[m].w_out);
        }
        fn(bp + "hf_combine", blk.hf_combine);
    }
    for (size_t j = 0; j < summary.weight.size(); ++j) {
        fn("summary.w" + std::to_string(j), summary.weight[j]);
        fn("summary.b" + std::to_string(j), summary.bias[j]);
    }
}

void HopularModel::visit_params(
    const std::function<void(const std::string&, const Tensor&)>& fn) const {
    const_cast<HopularModel*>(this)->visit_params(
        [&fn](const std::string& name, Tensor& t) { fn(name, t); });
}

HopularModel make_model(const TableSchema& schema, const HyperParams& hp, Rng& rng) {
    schema.validate();
    HopularModel model;
    model.schema = schema;
    model.hp = hp;
    const int64_t d = schema.attribute_count();
    const int64_t e = hp.embed_dim;
    if (hp.blocks < 0 || hp.heads < 1 || e < 1) throw ConfigError("invalid model dimensions");
    const int64_t de = d * e;
    if (de % hp.heads != 0)
        throw ConfigError("d*e = " + std::to_string(de) + " is not divisible by M = " +
                          std::to_string(hp.heads));
    const int64_t h = de / hp.heads;

    for (int64_t j = 0; j < d; ++j) {
        AttributeEmbedding a;
        const Attribute& attr = schema.attrs[static_cast<size_t>(j)];
        if (attr.kind == AttrKind::categorical) {
            a.value_map = glorot_uniform(attr.cardinality + 2, e, rng);
        } else {
            a.scale = glorot_uniform_vec(e, 1 + e, rng);
            a.bias = glorot_uniform_vec(e, 1 + e, rng);
            a.mask_token = glorot_uniform_vec(e, 1 + e, rng);
        }
        model.embedding.attrs.push_back(std::move(a));
    }
    model.embedding.position = glorot_uniform(d, e, rng);
    model.embedding.type_rows = glorot_uniform(3, e, rng);

    for (int64_t b = 0; b < hp.blocks; ++b) {
        BlockParams blk;
        for (int64_t m = 0; m < hp.heads; ++m) {
            HsHeadParams hs;
            hs.w_query = glorot_uniform(h, de, rng);
            hs.w_memory = glorot_uniform(h, de, rng);
            hs.w_out = glorot_uniform(de, h, rng);
            blk.hs_heads.push_back(std::move(hs));
        }
        blk.hs_combine = glorot_uniform(de, hp.heads * de, rng);
        for (int64_t m = 0; m < hp.heads; ++m) {
            HfHeadParams hf;
            hf.w_query = glorot_uniform(h, e, rng);
            hf.w_memory = glorot_uniform(h, e, rng);
            hf.w_out = glorot_uniform(e, h, rng);
            blk.hf_heads.push_back(std::move(hf));
        }
        blk.hf_combine = glorot_uniform(e, hp.heads * e, rng);
        model.blocks.push_back(std::move(blk));
    }

    for (int64_t j = 0; j < d; ++j) {
        const Attribute& attr = schema.attrs[static_cast<size_t>(j)];
        const int64_t arity = attr.kind == AttrKind::categorical ? attr.cardinality : 1;
        model.summary.weight.push_back(glorot_uniform(arity, e, rng));
        model.summary.bias.push_back(Tensor::zeros({arity}));
    }
    return model;
}

namespace {

// Shared structure walk for the binding variants. `bind` receives each
// parameter tensor in visit_params order.
template <typename BindFn>
BoundModel bind_model_impl(const HopularModel& model, BindFn&& bind) {
    BoundModel bound;
    bound.model = &model;
    for (size_t j = 0; j < model.embedding.attrs.size(); ++j) {
        const AttributeEmbedding& a = model.embedding.attrs[j];
        BoundAttribute ba;
        if (model.schema.attrs[j].kind == AttrKind::categorical) {
            ba.value_map = bind(a.value_map);
        } else {
            ba.scale = bind(a.scale);
            ba.bias = bind(a.bias);
            ba.mask_token = bind(a.mask_token);
        }
        bound.attrs.push_back(ba);
    }
    bound.position = bind(model.embedding.position);
    bound.type_rows = bind(model.embedding.type_rows);
    for (const BlockParams& blk : model.blocks) {
        BoundBlock bb;
        for (const HsHeadParams& head : blk.hs_heads)
            bb.hs_heads.push_back(
                BoundHsHead{bind(head.w_query), bind(head.w_memory), bind(head.w_out)});
        bb.hs_combine = bind(blk.hs_combine);
        for (const HfHeadParams& head : blk.hf_heads)
            bb.hf_heads.push_back(BoundHfHead{bind(head.w_query), bind(head.w_memory), bind(head.w_out)});
        bb.hf_combine = bind(blk.hf_combine);
        bound.blocks.push_back(std::move(bb));
    }
    for (size_t j = 0; j < model.summary.weight.size(); ++j) {
        bound.summary_weight.push_back(bind(model.summary.weight[j]));
        bound.summary_bias.push_back(bind(model.summary.bias[j]));
    }
    return bound;
}

}  // namespace

BoundModel bind_model(Tape& tape, const HopularModel& model, bool trainable) {
    BoundModel bound_out = bind_model_impl(model, [&](const Tensor& t) {
        return trainable ? tape.leaf(t) : tape.constant(t);
    });
    return bound_out;
}

BoundModel bind_model_selective(Tape& tape, const HopularModel& model, int64_t leaf_index,
                                Var substitute) {
    int64_t counter = 0;
    BoundModel bound_out = bind_model_impl(model, [&](const Tensor& t) {
        const int64_t index = counter++;
        if (index == leaf_index) {
            if (!substitute.valid() || !tape.value(substitute).same_shape(t))
                throw ContractError("bind_model_selective: substitute shape mismatch");
            return substitute;
        }
        return tape.constant(t);
    });
    return bound_out;
}

Var embed_sample(ForwardContext& ctx, const BoundModel& bound, const ModelInput& input) {
    (void)ctx;
    const HopularModel& model = *bound.model;
    const int64_t d = model.attr_count();
    if (static_cast<int64_t>(input.enc.categories.size()) != d ||
        static_cast<int64_t>(input.masked.size()) != d)
        throw DimensionError("embed_sample: input arity does not match schema");

    std::vector<Var> parts;
    parts.reserve(static_cast<size_t>(d));
    for (int64_t j = 0; j < d; ++j) {
        const Attribute& attr = model.schema.attrs[static_cast<size_t>(j)];
        const BoundAttribute& ba = bound.attrs[static_cast<size_t>(j)];
        Var value;
        if (input.masked[static_cast<size_t>(j)]) {
            value = attr.kind == AttrKind::categorical
                        ? row(ba.value_map, attr.cardinality + 1)
                        : ba.mask_token;
        } else if (attr.kind == AttrKind::categorical) {
            const int64_t cat = input.enc.categories[static_cast<size_t>(j)];
            if (cat < 0 || cat > attr.cardinality)
                throw EncodingError("unknown category id " + std::to_string(cat) +
                                    " for attribute '" + attr.name + "'");
            value = row(ba.value_map, cat);
        } else {
            value = add(scale(ba.scale, input.enc.values[static_cast<size_t>(j)]), ba.bias);
        }
        Var summed = add(add(value, row(bound.position, j)),
                         row(bound.type_rows, type_row_index(attr)));
        parts.push_back(summed);
    }
    return concat(parts);
}

ModelInput target_masked_input(const Dataset& ds, int64_t row) {
    ModelInput input;
    input.enc = encode(ds, row);
    input.masked.assign(static_cast<size_t>(ds.schema.attribute_count()), 0);
    input.masked[static_cast<size_t>(ds.schema.target_index)] = 1;
    return input;
}

Var build_memory(ForwardContext& ctx, const BoundModel& bound,
                 std::span<const ModelInput> train_inputs,
                 const std::optional<TrainQuery>& train_query) {
    if (train_inputs.empty()) throw ContractError("build_memory: empty training set");
    const bool drop = bound.model->hp.drop_self_column && train_query.has_value();
    if (train_query) {
        const int64_t col = train_query->column;
        if (col < 0 || col >= static_cast<int64_t>(train_inputs.size()))
            throw ContractError("build_memory: query column out of range");
    }
    std::vector<Var> columns;
    columns.reserve(train_inputs.size());
    for (size_t i = 0; i < train_inputs.size(); ++i) {
        if (train_query && static_cast<int64_t>(i) == train_query->column) {
            if (drop) continue;
            columns.push_back(embed_sample(ctx, bound, *train_query->query));
        } else {
            columns.push_back(embed_sample(ctx, bound, train_inputs[i]));
        }
    }
    Var x = concat_columns(columns);
    if (bound.model->hp.detach_memory) x = detach(x);
    return x;
}

MemoryBase build_memory_base(ForwardContext& ctx, const BoundModel& bound,
                             std::span<const ModelInput> train_inputs) {
    if (train_inputs.empty()) throw ContractError("build_memory_base: empty training set");
    MemoryBase base;
    std::vector<Var> columns;
    columns.reserve(train_inputs.size());
    for (const ModelInput& input : train_inputs)
        columns.push_back(embed_sample(ctx, bound, input));
    base.x = concat_columns(columns);
    if (bound.model->hp.detach_memory) base.x = detach(base.x);
    base.count = static_cast<int64_t>(train_inputs.size());
    base.projected.resize(bound.blocks.size());
    for (size_t b = 0; b < bound.blocks.size(); ++b)
        for (const BoundHsHead& head : bound.blocks[b].hs_heads)
            base.projected[b].push_back(matmul(head.w_memory, base.x));
    return base;
}

Var hs_head_forward(ForwardContext& ctx, const BoundHsHead& head, Var xi, Var memory_x,
                    double beta_eff) {
    if (ctx.tape->value(memory_x).cols() < 1)
        throw ContractError("hs_head_forward: empty memory");
    Var projected = matmul(head.w_memory, memory_x);
    SelfHandling none;
    return hs_head_forward_cached(ctx, head, xi, projected, none, beta_eff);
}

Var hs_head_forward_cached(ForwardContext& ctx, const BoundHsHead& head, Var xi, Var projected,
                           const SelfHandling& self, double beta_eff) {
    (void)ctx;
    Var query = matvec(head.w_query, xi);            // h
    Var scores = matvec_transposed(projected, query);  // n
    const bool patching = self.column >= 0 && !self.drop;
    Var patch_projected;
    if (patching) {
        patch_projected = matvec(head.w_memory, self.patch);  // h
        scores = replace_elem(scores, self.column, dot(patch_projected, query));
    } else if (self.column >= 0 && self.drop) {
        // Send the self score to -inf so its softmax weight is exactly zero.
        scores = replace_elem(scores, self.column,
                              ctx.tape->constant(Tensor::scalar(-1e300)));
    }
    Var weights = softmax_scaled(scores, beta_eff);   // n
    Var pooled = matvec(projected, weights);          // h
    if (patching) {
        // The pooled sum used the stale self column; swap in the patched one.
        Var correction = sub(patch_projected, col(projected, self.column));
        pooled = add(pooled, mul_by_scalar(correction, elem(weights, self.column)));
    }
    return matvec(head.w_out, pooled);  // d*e
}

Var hs_module_forward(ForwardContext& ctx, const BoundBlock& block, Var xi, Var memory_x,
                      double beta_eff) {
    std::vector<Var> outputs;
    outputs.reserve(block.hs_heads.size());
    for (const BoundHsHead& head : block.hs_heads)
        outputs.push_back(hs_head_forward(ctx, head, xi, memory_x, beta_eff));
    return matvec(block.hs_combine, concat(outputs));
}

Var hs_module_forward_cached(ForwardContext& ctx, const BoundBlock& block, Var xi,
                             std::span<const Var> projected, const SelfHandling& self,
                             double beta_eff) {
    std::vector<Var> outputs;
    outputs.reserve(block.hs_heads.size());
    for (size_t m = 0; m < block.hs_heads.size(); ++m)
        outputs.push_back(
            hs_head_forward_cached(ctx, block.hs_heads[m], xi, projected[m], self, beta_eff));
    return matvec(block.hs_combine, concat(outputs));
}

Var hf_head_forward(ForwardContext& ctx, const BoundHfHead& head, Var xi_matrix, Var y,
                    double beta_eff) {
    (void)ctx;
    Var stored = matmul(head.w_memory, y);             // h x d
    Var queries = matmul(head.w_query, xi_matrix);     // h x d
    Var scores = matmul(transpose(stored), queries);   // d x d, column = one query
    Var weights = softmax_columns(scores, beta_eff);
    Var pooled = matmul(stored, weights);              // h x d
    return matmul(head.w_out, pooled);                 // e x d
}

Var hf_module_forward(ForwardContext& ctx, const BoundBlock& block, Var xi_matrix, Var y,
                      double beta_eff) {
    std::vector<Var> outputs;
    outputs.reserve(block.hf_heads.size());
    for (const BoundHfHead& head : block.hf_heads)
        outputs.push_back(hf_head_forward(ctx, head, xi_matrix, y, beta_eff));
    return matmul(block.hf_combine, stack_rows(outputs));
}

Var block_forward(ForwardContext& ctx, const BoundBlock& block, Var xi,
                  std::span<const Var> projected, const SelfHandling& self, Var y,
                  const HyperParams& hp, double beta_eff) {
    Var hs_out = hs_module_forward_cached(ctx, block, xi, projected, self, beta_eff);
    if (ctx.training) hs_out = dropout(hs_out, hp.dropout_hidden, *ctx.rng, true);
    xi = add(xi, hs_out);

    const int64_t e = ctx.tape->value(y).rows();
    const int64_t d = ctx.tape->value(y).cols();
    Var xi_matrix = vec_to_columns(xi, e, d);
    Var hf_out = hf_module_forward(ctx, block, xi_matrix, y, beta_eff);
    if (ctx.training) hf_out = dropout(hf_out, hp.dropout_hidden, *ctx.rng, true);
    xi_matrix = add(xi_matrix, hf_out);
    return columns_to_vec(xi_matrix);
}

std::vector<Var> summarize(ForwardContext& ctx, const BoundModel& bound, Var xi_final) {
    const HopularModel& model = *bound.model;
    const int64_t d = model.attr_count();
    const int64_t e = model.hp.embed_dim;
    std::vector<Var> predictions;
    predictions.reserve(static_cast<size_t>(d));
    for (int64_t j = 0; j < d; ++j) {
        Var part = slice(xi_final, j * e, e);
        Var out = add(matvec(bound.summary_weight[static_cast<size_t>(j)], part),
                      bound.summary_bias[static_cast<size_t>(j)]);
        predictions.push_back(out);
    }
    (void)ctx;
    return predictions;
}

ForwardResult forward(ForwardContext& ctx, const BoundModel& bound, const ModelInput& input,
                      const MemoryBase& memory, int64_t self_column) {
    const HopularModel& model = *bound.model;
    ForwardResult result;
    result.clean_embedding = embed_sample(ctx, bound, input);

    Var xi = result.clean_embedding;
    if (ctx.training) xi = dropout(xi, model.hp.dropout_input, *ctx.rng, true);
    Var y = vec_to_columns(xi, model.hp.embed_dim, model.attr_count());

    SelfHandling self;
    self.column = self_column;
    if (self_column >= 0) {
        self.drop = model.hp.drop_self_column;
        if (!self.drop) {
            self.patch = model.hp.detach_memory ? detach(result.clean_embedding)
                                                : result.clean_embedding;
        }
    }

    const double beta = model.beta_eff();
    for (size_t b = 0; b < bound.blocks.size(); ++b)
        xi = block_forward(ctx, bound.blocks[b], xi, memory.projected[b], self, y, model.hp,
                           beta);

    if (ctx.training) xi = dropout(xi, model.hp.dropout_output, *ctx.rng, true);
    result.predictions = summarize(ctx, bound, xi);
    return result;
}

}  // namespace hopular
