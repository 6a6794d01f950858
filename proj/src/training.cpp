#include "hopular/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "hopular/errors.hpp"

namespace hopular {

MaskPlan draw_mask_plan(const TableSchema& schema, const MaskProbs& probs, int64_t self_position,
                        int64_t train_count, Rng& rng) {
    if (probs.mask < 0.0 || probs.replace < 0.0 || probs.mask + probs.replace > 1.0)
        throw ConfigError("mask/replace probabilities must be nonnegative and sum to <= 1");
    const int64_t d = schema.attribute_count();
    MaskPlan plan;
    plan.actions.assign(static_cast<size_t>(d), MaskAction::keep);
    plan.donors.assign(static_cast<size_t>(d), -1);
    for (int64_t j = 0; j < d; ++j) {
        if (schema.attrs[static_cast<size_t>(j)].is_target) {
            plan.actions[static_cast<size_t>(j)] = MaskAction::mask;
            continue;
        }
        const double u = rng.uniform01();
        if (u < probs.mask) {
            plan.actions[static_cast<size_t>(j)] = MaskAction::mask;
        } else if (u < probs.mask + probs.replace) {
            if (train_count < 2)
                throw MaskingError("replace action drawn but no donor sample exists");
            plan.actions[static_cast<size_t>(j)] = MaskAction::replace;
            // Uniform over the other training samples.
            int64_t donor = static_cast<int64_t>(rng.uniform_index(
                static_cast<uint64_t>(train_count - 1)));
            if (donor >= self_position) ++donor;
            plan.donors[static_cast<size_t>(j)] = donor;
        }
    }
    return plan;
}

MaskPlan inference_mask_plan(const TableSchema& schema) {
    const int64_t d = schema.attribute_count();
    MaskPlan plan;
    plan.actions.assign(static_cast<size_t>(d), MaskAction::keep);
    plan.donors.assign(static_cast<size_t>(d), -1);
    plan.actions[static_cast<size_t>(schema.target_index)] = MaskAction::mask;
    return plan;
}

MaskedSample apply_mask(const Dataset& ds, std::span<const int64_t> train_rows, int64_t row,
                        const MaskPlan& plan) {
    const int64_t d = ds.schema.attribute_count();
    if (static_cast<int64_t>(plan.actions.size()) != d)
        throw ContractError("mask plan arity does not match schema");
    MaskedSample out;
    out.input.enc = encode(ds, row);
    out.input.masked.assign(static_cast<size_t>(d), 0);
    for (int64_t j = 0; j < d; ++j) {
        switch (plan.actions[static_cast<size_t>(j)]) {
            case MaskAction::keep:
                break;
            case MaskAction::mask:
                out.input.masked[static_cast<size_t>(j)] = 1;
                if (!ds.schema.attrs[static_cast<size_t>(j)].is_target)
                    out.feature_loss_positions.push_back(j);
                break;
            case MaskAction::replace: {
                const int64_t donor_pos = plan.donors[static_cast<size_t>(j)];
                if (donor_pos < 0 || donor_pos >= static_cast<int64_t>(train_rows.size()))
                    throw MaskingError("replace donor position out of range");
                const EncodedSample donor = encode(ds, train_rows[static_cast<size_t>(donor_pos)]);
                out.input.enc.values[static_cast<size_t>(j)] =
                    donor.values[static_cast<size_t>(j)];
                out.input.enc.categories[static_cast<size_t>(j)] =
                    donor.categories[static_cast<size_t>(j)];
                out.feature_loss_positions.push_back(j);
                break;
            }
        }
    }
    return out;
}

double gamma_schedule(int64_t epoch, int64_t total) {
    if (total < 1) throw ContractError("gamma_schedule: total must be >= 1");
    if (epoch < 0 || epoch > total) throw ContractError("gamma_schedule: epoch out of range");
    constexpr double pi = 3.14159265358979323846;
    return 0.5 * (1.0 + std::cos(pi * static_cast<double>(epoch) / static_cast<double>(total)));
}

double cross_entropy_logits(const Tensor& logits, int64_t truth) {
    if (truth < 0 || truth >= logits.size())
        throw ContractError("cross_entropy_logits: class index out of range");
    return logsumexp(logits, 1.0) - logits[truth];
}

LossBreakdown compute_loss(const std::vector<std::vector<Tensor>>& predictions,
                           const std::vector<std::vector<TruthValue>>& truths,
                           const std::vector<LossPosition>& positions, double gamma) {
    double sum_f = 0.0, sum_t = 0.0;
    int64_t count_f = 0, count_t = 0;
    for (const LossPosition& pos : positions) {
        const Tensor& pred =
            predictions[static_cast<size_t>(pos.sample)][static_cast<size_t>(pos.attr)];
        const TruthValue& truth =
            truths[static_cast<size_t>(pos.sample)][static_cast<size_t>(pos.attr)];
        double term = 0.0;
        if (truth.categorical) {
            term = cross_entropy_logits(pred, truth.category);
        } else {
            const double diff = pred.item() - truth.value;
            term = diff * diff;
        }
        if (pos.is_target) {
            sum_t += term;
            ++count_t;
        } else {
            sum_f += term;
            ++count_f;
        }
    }
    LossBreakdown breakdown;
    breakdown.gamma = gamma;
    breakdown.loss_feature = count_f > 0 ? sum_f / static_cast<double>(count_f) : 0.0;
    breakdown.loss_target = count_t > 0 ? sum_t / static_cast<double>(count_t) : 0.0;
    breakdown.total =
        gamma * breakdown.loss_feature + (1.0 - gamma) * breakdown.loss_target;
    return breakdown;
}

void LambOptimizer::step(std::span<const std::string> names, std::span<Tensor* const> params,
                         std::span<const Tensor> grads) {
    if (params.size() != grads.size() || params.size() != names.size())
        throw ContractError("optimizer step: registry sizes disagree");
    if (m_.empty()) {
        for (Tensor* p : params) {
            m_.push_back(Tensor::zeros(p->shape()));
            v_.push_back(Tensor::zeros(p->shape()));
            slow_.push_back(*p);
        }
    }
    ++step_count_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_count_));

    for (size_t k = 0; k < params.size(); ++k) {
        Tensor& w = *params[k];
        const Tensor& g = grads[k];
        if (!g.all_finite())
            throw OptimizerError("non-finite gradient for parameter '" + names[k] + "'");
        Tensor& m = m_[k];
        Tensor& v = v_[k];
        Tensor update = Tensor::zeros(w.shape());
        for (int64_t i = 0; i < w.size(); ++i) {
            m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
            v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            update[i] = m_hat / (std::sqrt(v_hat) + config_.eps) + config_.weight_decay * w[i];
        }
        const double w_norm = w.norm();
        const double u_norm = update.norm();
        double trust = 1.0;
        if (w_norm > 0.0 && u_norm > 0.0)
            trust = std::min(std::max(w_norm, 0.0), config_.trust_clip) / u_norm;
        for (int64_t i = 0; i < w.size(); ++i)
            w[i] -= config_.learning_rate * trust * update[i];
    }
}

void LambOptimizer::ema_update(std::span<Tensor* const> params) {
    if (slow_.empty())
        for (Tensor* p : params) slow_.push_back(*p);
    if (config_.ema_every > 1 && step_count_ % config_.ema_every != 0) return;
    for (size_t k = 0; k < params.size(); ++k) {
        Tensor& s = slow_[k];
        const Tensor& f = *params[k];
        for (int64_t i = 0; i < s.size(); ++i)
            s[i] += config_.ema_alpha * (f[i] - s[i]);
    }
}

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Flat views of a bound model in the exact visit_params order.
std::vector<Var> flatten_bound(const BoundModel& bound) {
    std::vector<Var> flat;
    const HopularModel& model = *bound.model;
    for (size_t j = 0; j < bound.attrs.size(); ++j) {
        if (model.schema.attrs[j].kind == AttrKind::categorical) {
            flat.push_back(bound.attrs[j].value_map);
        } else {
            flat.push_back(bound.attrs[j].scale);
            flat.push_back(bound.attrs[j].bias);
            flat.push_back(bound.attrs[j].mask_token);
        }
    }
    flat.push_back(bound.position);
    flat.push_back(bound.type_rows);
    for (const BoundBlock& blk : bound.blocks) {
        for (const BoundHsHead& head : blk.hs_heads) {
            flat.push_back(head.w_query);
            flat.push_back(head.w_memory);
            flat.push_back(head.w_out);
        }
        flat.push_back(blk.hs_combine);
        for (const BoundHfHead& head : blk.hf_heads) {
            flat.push_back(head.w_query);
            flat.push_back(head.w_memory);
            flat.push_back(head.w_out);
        }
        flat.push_back(blk.hf_combine);
    }
    for (size_t j = 0; j < bound.summary_weight.size(); ++j) {
        flat.push_back(bound.summary_weight[j]);
        flat.push_back(bound.summary_bias[j]);
    }
    return flat;
}

struct ParamRegistry {
    std::vector<std::string> names;
    std::vector<Tensor*> tensors;
};

ParamRegistry registry_of(HopularModel& model) {
    ParamRegistry reg;
    model.visit_params([&reg](const std::string& name, Tensor& t) {
        reg.names.push_back(name);
        reg.tensors.push_back(&t);
    });
    return reg;
}

TruthValue truth_of(const Dataset& ds, const EncodedSample& enc, int64_t attr) {
    const Attribute& a = ds.schema.attrs[static_cast<size_t>(attr)];
    TruthValue t;
    if (a.kind == AttrKind::categorical) {
        t.categorical = true;
        t.category = enc.categories[static_cast<size_t>(attr)];
    } else {
        t.value = enc.values[static_cast<size_t>(attr)];
    }
    return t;
}

// Positions whose truth cannot be scored (missing target, or the synthetic
// "missing" category that lies outside the prediction arity) are skipped.
bool scorable(const Dataset& ds, const EncodedSample& enc, int64_t attr) {
    const Attribute& a = ds.schema.attrs[static_cast<size_t>(attr)];
    if (enc.missing[static_cast<size_t>(attr)]) return false;
    if (a.kind == AttrKind::categorical &&
        enc.categories[static_cast<size_t>(attr)] >= a.cardinality)
        return false;
    return true;
}

Var loss_term(Tape& tape, Var pred, const TruthValue& truth) {
    if (truth.categorical)
        return sub(logsumexp(pred, 1.0), elem(pred, truth.category));
    Var diff = add_const(pred, -truth.value);
    (void)tape;
    return mul(diff, diff);
}

}  // namespace

TrainingBatchLoss build_training_loss(ForwardContext& ctx, const BoundModel& bound,
                                      const Dataset& ds,
                                      std::span<const EncodedSample> train_enc,
                                      std::span<const MaskedSample> masked,
                                      std::span<const int64_t> batch, double gamma) {
    Tape& tape = *ctx.tape;
    const int64_t d = ds.schema.attribute_count();
    const int64_t target = ds.schema.target_index;

    std::vector<ModelInput> memory_inputs;
    memory_inputs.reserve(train_enc.size());
    for (const EncodedSample& enc : train_enc) {
        ModelInput mi;
        mi.enc = enc;
        mi.masked.assign(static_cast<size_t>(d), 0);
        mi.masked[static_cast<size_t>(target)] = 1;
        memory_inputs.push_back(std::move(mi));
    }
    MemoryBase memory = build_memory_base(ctx, bound, memory_inputs);

    std::vector<Var> feature_terms, target_terms;
    for (int64_t i : batch) {
        const MaskedSample& ms = masked[static_cast<size_t>(i)];
        ForwardResult fr = forward(ctx, bound, ms.input, memory, i);
        const EncodedSample& enc = train_enc[static_cast<size_t>(i)];
        for (int64_t attr : ms.feature_loss_positions) {
            if (!scorable(ds, enc, attr)) continue;
            feature_terms.push_back(loss_term(
                tape, fr.predictions[static_cast<size_t>(attr)], truth_of(ds, enc, attr)));
        }
        if (scorable(ds, enc, target))
            target_terms.push_back(loss_term(tape, fr.predictions[static_cast<size_t>(target)],
                                             truth_of(ds, enc, target)));
    }

    TrainingBatchLoss out;
    out.feature_positions = static_cast<int64_t>(feature_terms.size());
    out.target_positions = static_cast<int64_t>(target_terms.size());
    out.loss_feature = feature_terms.empty()
                           ? tape.constant(Tensor::scalar(0.0))
                           : scale(sum(concat(feature_terms)),
                                   1.0 / static_cast<double>(feature_terms.size()));
    out.loss_target = target_terms.empty()
                          ? tape.constant(Tensor::scalar(0.0))
                          : scale(sum(concat(target_terms)),
                                  1.0 / static_cast<double>(target_terms.size()));
    out.total = add(scale(out.loss_feature, gamma), scale(out.loss_target, 1.0 - gamma));
    return out;
}

double model_gradient_check(const HopularModel& model, const Dataset& ds, double gamma,
                            double eps) {
    const std::vector<int64_t> train_rows = ds.rows_of_split(kTrain);
    if (train_rows.empty()) throw ConfigError("model_gradient_check: empty training split");
    const int64_t n = static_cast<int64_t>(train_rows.size());

    std::vector<EncodedSample> train_enc;
    for (int64_t r : train_rows) train_enc.push_back(encode(ds, r));

    // Fixed masked batch with generous mask/replace rates so the mask token
    // and donor paths receive gradient signal. Dropout stays off: finite
    // differences need a deterministic objective.
    Rng mask_rng(7);
    MaskProbs probs{0.3, 0.3};
    std::vector<MaskedSample> masked;
    for (int64_t i = 0; i < n; ++i) {
        const MaskPlan plan = draw_mask_plan(ds.schema, probs, i, n, mask_rng);
        masked.push_back(apply_mask(ds, train_rows, train_rows[static_cast<size_t>(i)], plan));
    }
    std::vector<int64_t> batch(static_cast<size_t>(n));
    std::iota(batch.begin(), batch.end(), 0);

    int64_t param_count = 0;
    std::vector<Tensor> param_values;
    const_cast<HopularModel&>(model).visit_params(
        [&](const std::string&, Tensor& t) {
            ++param_count;
            param_values.push_back(t);
        });

    double worst = 0.0;
    for (int64_t k = 0; k < param_count; ++k) {
        auto f = [&](Tape& tape, Var xv) {
            ForwardContext ctx{&tape, nullptr, false};
            BoundModel bound = bind_model_selective(tape, model, k, xv);
            return build_training_loss(ctx, bound, ds, train_enc, masked, batch, gamma).total;
        };
        worst = std::max(worst,
                         finite_diff_check(f, param_values[static_cast<size_t>(k)], eps));
    }
    return worst;
}

void write_history_line(std::ostream& out, const EpochRecord& r) {
    out << "{\"epoch\":" << r.epoch << ",\"gamma\":" << fmt17(r.gamma)
        << ",\"loss_feature\":" << fmt17(r.loss_feature)
        << ",\"loss_target\":" << fmt17(r.loss_target)
        << ",\"loss_total\":" << fmt17(r.loss_total)
        << ",\"val_metric\":" << fmt17(r.val_metric) << "}\n";
}

double evaluate_target_loss(const HopularModel& model, const Dataset& ds, int split) {
    const std::vector<int64_t> train_rows = ds.rows_of_split(kTrain);
    const std::vector<int64_t> eval_rows = ds.rows_of_split(split);
    if (train_rows.empty() || eval_rows.empty())
        throw ConfigError("evaluate_target_loss: empty split");

    Tape tape;
    ForwardContext ctx{&tape, nullptr, false};
    BoundModel bound = bind_model(tape, model, false);
    std::vector<ModelInput> memory_inputs;
    memory_inputs.reserve(train_rows.size());
    for (int64_t r : train_rows) memory_inputs.push_back(target_masked_input(ds, r));
    MemoryBase memory = build_memory_base(ctx, bound, memory_inputs);

    const int64_t target = ds.schema.target_index;
    double sum = 0.0;
    int64_t count = 0;
    for (int64_t r : eval_rows) {
        const EncodedSample enc = encode(ds, r);
        if (!scorable(ds, enc, target)) continue;
        ModelInput input = target_masked_input(ds, r);
        ForwardResult fr = forward(ctx, bound, input, memory, -1);
        const Tensor pred = tape.value(fr.predictions[static_cast<size_t>(target)]);
        if (ds.schema.task == Task::classification) {
            sum += cross_entropy_logits(pred, enc.categories[static_cast<size_t>(target)]);
        } else {
            const double diff = pred.item() - enc.values[static_cast<size_t>(target)];
            sum += diff * diff;
        }
        ++count;
    }
    if (count == 0) throw ConfigError("evaluate_target_loss: no scorable rows in split");
    return sum / static_cast<double>(count);
}

EvalMetric evaluate_model(const HopularModel& model, const Dataset& ds, int split) {
    const std::vector<int64_t> train_rows = ds.rows_of_split(kTrain);
    const std::vector<int64_t> eval_rows = ds.rows_of_split(split);
    if (train_rows.empty() || eval_rows.empty())
        throw ConfigError("evaluate_model: empty split");

    Tape tape;
    ForwardContext ctx{&tape, nullptr, false};
    BoundModel bound = bind_model(tape, model, false);
    std::vector<ModelInput> memory_inputs;
    memory_inputs.reserve(train_rows.size());
    for (int64_t r : train_rows) memory_inputs.push_back(target_masked_input(ds, r));
    MemoryBase memory = build_memory_base(ctx, bound, memory_inputs);

    const int64_t target = ds.schema.target_index;
    EvalMetric metric;
    double sum = 0.0;
    int64_t count = 0;
    for (int64_t r : eval_rows) {
        const EncodedSample enc = encode(ds, r);
        if (!scorable(ds, enc, target)) continue;
        ModelInput input = target_masked_input(ds, r);
        ForwardResult fr = forward(ctx, bound, input, memory, -1);
        const Tensor pred = tape.value(fr.predictions[static_cast<size_t>(target)]);
        if (ds.schema.task == Task::classification) {
            int64_t argmax = 0;
            for (int64_t c = 1; c < pred.size(); ++c)
                if (pred[c] > pred[argmax]) argmax = c;
            sum += argmax == enc.categories[static_cast<size_t>(target)] ? 1.0 : 0.0;
        } else {
            const double predicted = denormalize_target(ds, pred.item());
            const double actual =
                ds.rows[static_cast<size_t>(r)][static_cast<size_t>(target)].number;
            sum += (predicted - actual) * (predicted - actual);
        }
        ++count;
    }
    if (count == 0) throw ConfigError("evaluate_model: no scorable rows in split");
    if (ds.schema.task == Task::classification) {
        metric.name = "accuracy";
        metric.value = sum / static_cast<double>(count);
    } else {
        metric.name = "mse_x1000";
        metric.value = 1000.0 * sum / static_cast<double>(count);
    }
    return metric;
}

FitResult fit(HopularModel& model, const Dataset& ds, const TrainConfig& config,
              std::ostream* history_out) {
    const std::vector<int64_t> train_rows = ds.rows_of_split(kTrain);
    if (train_rows.empty()) throw ConfigError("fit: empty training split");
    if (ds.rows_of_split(kVal).empty()) throw ConfigError("fit: empty validation split");
    const int64_t n = static_cast<int64_t>(train_rows.size());

    ParamRegistry reg = registry_of(model);
    LambOptimizer optimizer(config.opt);
    Rng rng(config.seed);

    // Encodes are split-stable; cache them once.
    std::vector<EncodedSample> train_enc;
    train_enc.reserve(train_rows.size());
    for (int64_t r : train_rows) train_enc.push_back(encode(ds, r));

    FitResult result;
    double best_val = std::numeric_limits<double>::infinity();
    std::vector<Tensor> best_slow;

    std::vector<int64_t> order(train_rows.size());
    std::iota(order.begin(), order.end(), 0);
    const bool full_batch = n <= config.full_batch_limit;

    for (int64_t epoch = 0; epoch < config.epochs; ++epoch) {
        const double gamma = config.gamma_start * gamma_schedule(epoch, config.epochs);
        rng.shuffle(order);

        // Draw each sample's mask plan in train-row order (batch-independent).
        std::vector<MaskedSample> masked(train_rows.size());
        for (int64_t i = 0; i < n; ++i) {
            const MaskPlan plan =
                draw_mask_plan(ds.schema, config.mask_probs, i, n, rng);
            masked[static_cast<size_t>(i)] =
                apply_mask(ds, train_rows, train_rows[static_cast<size_t>(i)], plan);
        }

        std::vector<std::pair<int64_t, int64_t>> batches;  // [begin, end) into order
        if (full_batch) {
            batches.emplace_back(0, n);
        } else {
            for (int64_t b = 0; b < n; b += config.batch_size)
                batches.emplace_back(b, std::min(n, b + config.batch_size));
        }

        double sum_f = 0.0, sum_t = 0.0;
        int64_t count_f = 0, count_t = 0;
        double single_batch_lf = 0.0, single_batch_lt = 0.0;

        for (const auto& [begin, end] : batches) {
            Tape tape;
            ForwardContext ctx{&tape, &rng, true};
            BoundModel bound = bind_model(tape, model, true);

            std::vector<int64_t> batch;
            batch.reserve(static_cast<size_t>(end - begin));
            for (int64_t k = begin; k < end; ++k)
                batch.push_back(order[static_cast<size_t>(k)]);

            TrainingBatchLoss loss;
            try {
                loss = build_training_loss(ctx, bound, ds, train_enc, masked, batch, gamma);
            } catch (const DomainError& e) {
                throw TrainingError("non-finite activations at epoch " +
                                    std::to_string(epoch) + ": gamma=" + fmt17(gamma) +
                                    " (" + e.what() + ")");
            }

            const double lf = tape.value(loss.loss_feature).item();
            const double lt = tape.value(loss.loss_target).item();
            const double lv = tape.value(loss.total).item();
            if (!std::isfinite(lv))
                throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) +
                                    ": gamma=" + fmt17(gamma) + " loss_feature=" + fmt17(lf) +
                                    " loss_target=" + fmt17(lt));
            sum_f += lf * static_cast<double>(loss.feature_positions);
            sum_t += lt * static_cast<double>(loss.target_positions);
            count_f += loss.feature_positions;
            count_t += loss.target_positions;
            single_batch_lf = lf;
            single_batch_lt = lt;

            tape.backward(loss.total);
            const std::vector<Var> flat = flatten_bound(bound);
            std::vector<Tensor> grads;
            grads.reserve(flat.size());
            for (const Var& v : flat) grads.push_back(tape.grad(v));
            optimizer.step(reg.names, reg.tensors, grads);
            optimizer.ema_update(reg.tensors);
        }

        EpochRecord record;
        record.epoch = epoch;
        record.gamma = gamma;
        if (batches.size() == 1) {
            record.loss_feature = single_batch_lf;
            record.loss_target = single_batch_lt;
        } else {
            record.loss_feature = count_f > 0 ? sum_f / static_cast<double>(count_f) : 0.0;
            record.loss_target = count_t > 0 ? sum_t / static_cast<double>(count_t) : 0.0;
        }
        record.loss_total =
            gamma * record.loss_feature + (1.0 - gamma) * record.loss_target;

        // Validation runs on the slow weights.
        {
            std::vector<Tensor> fast;
            fast.reserve(reg.tensors.size());
            for (Tensor* p : reg.tensors) fast.push_back(*p);
            const std::vector<Tensor>& slow = optimizer.slow_weights();
            for (size_t k = 0; k < reg.tensors.size(); ++k) *reg.tensors[k] = slow[k];
            record.val_metric = evaluate_target_loss(model, ds, kVal);
            for (size_t k = 0; k < reg.tensors.size(); ++k) *reg.tensors[k] = fast[k];
        }

        result.history.push_back(record);
        if (history_out) write_history_line(*history_out, record);
        result.epochs_run = epoch + 1;

        if (record.val_metric < best_val) {
            best_val = record.val_metric;
            result.best_epoch = epoch;
            best_slow = optimizer.slow_weights();
        }
        if (config.patience > 0 && epoch - result.best_epoch >= config.patience) break;
    }

    result.best_val_metric = best_val;
    if (!best_slow.empty())
        for (size_t k = 0; k < reg.tensors.size(); ++k) *reg.tensors[k] = best_slow[k];
    return result;
}

}  // namespace hopular
