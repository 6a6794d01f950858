#include "hopular/autodiff.hpp"

#include <cmath>
#include <utility>

namespace hopular {

const Tensor& Var::value() const { return tape->value(*this); }

Var Tape::leaf(Tensor value) {
    nodes_.push_back(Node{std::move(value), Tensor{}, {}, nullptr, true});
    return Var{this, static_cast<uint32_t>(nodes_.size() - 1)};
}

Var Tape::constant(Tensor value) {
    nodes_.push_back(Node{std::move(value), Tensor{}, {}, nullptr, false});
    return Var{this, static_cast<uint32_t>(nodes_.size() - 1)};
}

Var Tape::emit(Tensor value, std::vector<uint32_t> parents,
               std::function<void(Tape&, uint32_t)> pull, bool force_no_grad) {
    bool needs = false;
    if (!force_no_grad) {
        for (uint32_t p : parents) needs = needs || nodes_[p].needs_grad;
    }
    nodes_.push_back(Node{std::move(value), Tensor{}, std::move(parents),
                          needs ? std::move(pull) : nullptr, needs});
    return Var{this, static_cast<uint32_t>(nodes_.size() - 1)};
}

const Tensor& Tape::value(Var v) const { return nodes_[v.id].value; }

Tensor Tape::grad(Var v) const {
    const Node& n = nodes_[v.id];
    if (n.grad.size() == 0) return Tensor::zeros(n.value.shape());
    return n.grad;
}

void Tape::accumulate(uint32_t id, const Tensor& contribution) {
    Node& n = nodes_[id];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0) {
        n.grad = contribution;
        return;
    }
    for (int64_t i = 0; i < n.grad.size(); ++i) n.grad[i] += contribution[i];
}

void Tape::accumulate_at(uint32_t id, int64_t flat_index, double contribution) {
    Node& n = nodes_[id];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0) n.grad = Tensor::zeros(n.value.shape());
    n.grad[flat_index] += contribution;
}

const Tensor& Tape::node_grad(uint32_t id) const { return nodes_[id].grad; }

void Tape::backward(Var root) {
    if (root.tape != this) throw ContractError("backward: root is not on this tape");
    if (!nodes_[root.id].value.is_scalar())
        throw ContractError("backward requires a scalar root, got shape " +
                            nodes_[root.id].value.shape_string());
    if (swept_) throw ContractError("backward called twice on the same tape");
    swept_ = true;

    Node& r = nodes_[root.id];
    r.grad = Tensor::full(r.value.shape(), 1.0);
    for (uint32_t i = root.id + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.needs_grad || !n.pull || n.grad.size() == 0) continue;
        n.pull(*this, i);
    }
}

void Tape::clear() {
    nodes_.clear();
    swept_ = false;
}

namespace {

void check_same_tape(Var a, Var b, const char* op) {
    if (a.tape != b.tape) throw ContractError(std::string(op) + ": operands on different tapes");
}

Tensor outer(const Tensor& u, const Tensor& v) {
    Tensor m = Tensor::matrix(u.size(), v.size());
    for (int64_t i = 0; i < u.size(); ++i)
        for (int64_t j = 0; j < v.size(); ++j) m.at(i, j) = u[i] * v[j];
    return m;
}

}  // namespace

Var add(Var a, Var b) {
    check_same_tape(a, b, "add");
    Tape& t = *a.tape;
    Tensor out = hopular::add(t.value(a), t.value(b));
    const uint32_t pa = a.id, pb = b.id;
    return t.emit(std::move(out), {pa, pb}, [pa, pb](Tape& tp, uint32_t self) {
        const Tensor& g = tp.node_grad(self);
        tp.accumulate(pa, g);
        tp.accumulate(pb, g);
    });
}

Var sub(Var a, Var b) {
    check_same_tape(a, b, "sub");
    Tape& t = *a.tape;
    Tensor out = hopular::sub(t.value(a), t.value(b));
    const uint32_t pa = a.id, pb = b.id;
    return t.emit(std::move(out), {pa, pb}, [pa, pb](Tape& tp, uint32_t self) {
        const Tensor& g = tp.node_grad(self);
        tp.accumulate(pa, g);
        tp.accumulate(pb, scale(g, -1.0));
    });
}

Var mul(Var a, Var b) {
    check_same_tape(a, b, "mul");
    Tape& t = *a.tape;
    Tensor out = hopular::mul(t.value(a), t.value(b));
    const uint32_t pa = a.id, pb = b.id;
    return t.emit(std::move(out), {pa, pb}, [pa, pb](Tape& tp, uint32_t self) {
        const Tensor& g = tp.node_grad(self);
        tp.accumulate(pa, hopular::mul(g, tp.value(Var{&tp, pb})));
        tp.accumulate(pb, hopular::mul(g, tp.value(Var{&tp, pa})));
    });
}

Var scale(Var a, double c) {
    Tape& t = *a.tape;
    Tensor out = hopular::scale(t.value(a), c);
    const uint32_t pa = a.id;
    return t.emit(std::move(out), {pa}, [pa, c](Tape& tp, uint32_t self) {
        tp.accumulate(pa, hopular::scale(tp.node_grad(self), c));
    });
}

Var add_const(Var a, double c) {
    Tape& t = *a.tape;
    Tensor out = t.value(a);
    for (int64_t i = 0; i < out.size(); ++i) out[i] += c;
    const uint32_t pa = a.id;
    return t.emit(std::move(out), {pa}, [pa](Tape& tp, uint32_t self) {
        tp.accumulate(pa, tp.node_grad(self));
    });
}

Var mul_by_scalar(Var a, Var s) {
    check_same_tape(a, s, "mul_by_scalar");
    Tape& t = *a.tape;
    const double sv = t.value(s).item();
    Tensor out = hopular::scale(t.value(a), sv);
    const uint32_t pa = a.id, ps = s.id;
    return t.emit(std::move(out), {pa, ps}, [pa, ps, sv](Tape& tp, uint32_t self) {
        const Tensor& g = tp.node_grad(self);
        tp.accumulate(pa, hopular::scale(g, sv));
        tp.accumulate(ps, Tensor::scalar(hopular::dot(g, tp.value(Var{&tp, pa}))));
    });
}

Var matmul(Var a, Var b) {
    check_same_tape(a, b, "matmul");
    Tape& t = *a.tape;
    Tensor out = hopular::matmul(t.value(a), t.value(b));
    const uint32_t pa = a.id, pb = b.id;
    return t.emit(std::move(out), {pa, pb}, [pa, pb](Tape& tp, uint32_t self) {
        const Tensor& g = tp.node_grad(self);
        const Tensor& av = tp.value(Var{&tp, pa});
        const Tensor& bv = tp.value(Var{&tp, pb});
        if (tp.node_needs_grad(pa)) tp.accumulate(pa, hopular::matmul(g, bv.transposed()));
        if (tp.node_needs_grad(pb)) tp.accumulate(pb, hopular::matmul(av.transposed(), g));
    });
}

Var matvec(Var a, Var v) {
    check_same_tape(a, v, "matvec");
    Tape& t = *a.tape;
    Tensor out = hopular::matvec(t.value(a), t.value(v));
    const uint32_t pa = a.id, pv = v.id;
    return t.emit(std::move(out), {pa, pv}, [pa, pv](Tape& tp, uint32_t self) {
        const Tensor& g = tp.node_grad(self);
        const Tensor& av = tp.value(Var{&tp, pa});
        const Tensor& vv = tp.value(Var{&tp, pv});
        if (tp.node_needs_grad(pa)) tp.accumulate(pa, outer(g, vv));
        if (tp.node_needs_grad(pv)) tp.accumulate(pv, hopular::matvec_transposed(av, g));
    });
}

Var matvec_transposed(Var a, Var v) {
    check_same_tape(a, v, "matvec_transposed");
    Tape& t = *a.tape;
    Tensor out = hopular::matvec_transposed(t.value(a), t.value(v));
    const uint32_t pa = a.id, pv = v.id;
    return t.emit(std::move(out), {pa, pv}, [pa, pv](Tape& tp, uint32_t self) {
        const Tensor& g = tp.node_grad(self);
        const Tensor& av = tp.value(Var{&tp, pa});
        const Tensor& vv = tp.value(Var{&tp, pv});
        if (tp.node_needs_grad(pa)) tp.accumulate(pa, outer(vv, g));
        if (tp.node_needs_grad(pv)) tp.accumulate(pv, hopular::matvec(av, g));
    });
}

Var dot(Var a, Var b) {
    check_same_tape(a, b, "dot");
    Tape& t = *a.tape;
    Tensor out = Tensor::scalar(hopular::dot(t.value(a), t.value(b)));
    const uint32_t pa = a.id, pb = b.id;
    return t.emit(std::move(out), {pa, pb}, [pa, pb](Tape& tp, uint32_t self) {
        const double g = tp.node_grad(self).item();
        tp.accumulate(pa, hopular::scale(tp.value(Var{&tp, pb}), g));
        tp.accumulate(pb, hopular::scale(tp.value(Var{&tp, pa}), g));
    });
}

Var transpose(Var a) {
    Tape& t = *a.tape;
    Tensor out = t.value(a).transposed();
    const uint32_t pa = a.id;
    return t.emit(std::move(out), {pa}, [pa](Tape& tp, uint32_t self) {
        tp.accumulate(pa, tp.node_grad(self).transposed());
    });
}

Var softmax_scaled(Var v, double beta) {
    Tape& t = *v.tape;
    Tensor out = hopular::softmax_scaled(t.value(v), beta);
    const uint32_t pv = v.id;
    return t.emit(std::move(out), {pv}, [pv, beta](Tape& tp, uint32_t self) {
        // dv_j = beta * p_j * (g_j - sum_i g_i p_i)
        const Tensor& g = tp.node_grad(self);
        const Tensor& p = tp.value(Var{&tp, self});
        const double gp = hopular::dot(g, p);
        Tensor dv = Tensor::zeros(p.shape());
        for (int64_t j = 0; j < p.size(); ++j) dv[j] = beta * p[j] * (g[j] - gp);
        tp.accumulate(pv, dv);
    });
}

Var softmax_columns(Var m, double beta) {
    Tape& t = *m.tape;
    Tensor out = hopular::softmax_columns(t.value(m), beta);
    const uint32_t pm = m.id;
    return t.emit(std::move(out), {pm}, [pm, beta](Tape& tp, uint32_t self) {
        const Tensor& g = tp.node_grad(self);
        const Tensor& p = tp.value(Var{&tp, self});
        const int64_t r = p.rows(), c = p.cols();
        Tensor dm = Tensor::matrix(r, c);
        for (int64_t j = 0; j < c; ++j) {
            double gp = 0.0;
            for (int64_t i = 0; i < r; ++i) gp += g.at(i, j) * p.at(i, j);
            for (int64_t i = 0; i < r; ++i)
                dm.at(i, j) = beta * p.at(i, j) * (g.at(i, j) - gp);
        }
        tp.accumulate(pm, dm);
    });
}

Var logsumexp(Var v, double beta) {
    Tape& t = *v.tape;
    Tensor out = Tensor::scalar(hopular::logsumexp(t.value(v), beta));
    const uint32_t pv = v.id;
    return t.emit(std::move(out), {pv}, [pv, beta](Tape& tp, uint32_t self) {
        const double g = tp.node_grad(self).item();
        Tensor p = hopular::softmax_scaled(tp.value(Var{&tp, pv}), beta);
        tp.accumulate(pv, hopular::scale(p, g));
    });
}

Var sum(Var v) {
    Tape& t = *v.tape;
    const Tensor& vv = t.value(v);
    double s = 0.0;
    for (int64_t i = 0; i < vv.size(); ++i) s += vv[i];
    const uint32_t pv = v.id;
    return t.emit(Tensor::scalar(s), {pv}, [pv](Tape& tp, uint32_t self) {
        const double g = tp.node_grad(self).item();
        tp.accumulate(pv, Tensor::full(tp.value(Var{&tp, pv}).shape(), g));
    });
}

Var mean(Var v) {
    const int64_t n = v.tape->value(v).size();
    return scale(sum(v), 1.0 / static_cast<double>(n));
}

Var row(Var m, int64_t i) {
    Tape& t = *m.tape;
    Tensor out = t.value(m).row_vector(i);
    const uint32_t pm = m.id;
    const int64_t c = t.value(m).cols();
    return t.emit(std::move(out), {pm}, [pm, i, c](Tape& tp, uint32_t self) {
        const Tensor& g = tp.node_grad(self);
        for (int64_t j = 0; j < c; ++j) tp.accumulate_at(pm, i * c + j, g[j]);
    });
}

Var col(Var m, int64_t j) {
    Tape& t = *m.tape;
    Tensor out = t.value(m).col_vector(j);
    const uint32_t pm = m.id;
    const int64_t r = t.value(m).rows(), c = t.value(m).cols();
    return t.emit(std::move(out), {pm}, [pm, j, r, c](Tape& tp, uint32_t self) {
        const Tensor& g = tp.node_grad(self);
        for (int64_t i = 0; i < r; ++i) tp.accumulate_at(pm, i * c + j, g[i]);
    });
}

Var elem(Var v, int64_t i) {
    Tape& t = *v.tape;
    if (i < 0 || i >= t.value(v).size()) throw ContractError("elem index out of range");
    Tensor out = Tensor::scalar(t.value(v)[i]);
    const uint32_t pv = v.id;
    return t.emit(std::move(out), {pv}, [pv, i](Tape& tp, uint32_t self) {
        tp.accumulate_at(pv, i, tp.node_grad(self).item());
    });
}

Var slice(Var v, int64_t start, int64_t len) {
    Tape& t = *v.tape;
    const Tensor& vv = t.value(v);
    if (start < 0 || len < 0 || start + len > vv.size())
        throw ContractError("slice out of range");
    Tensor out = Tensor::zeros({len});
    for (int64_t i = 0; i < len; ++i) out[i] = vv[start + i];
    const uint32_t pv = v.id;
    return t.emit(std::move(out), {pv}, [pv, start, len](Tape& tp, uint32_t self) {
        const Tensor& g = tp.node_grad(self);
        for (int64_t i = 0; i < len; ++i) tp.accumulate_at(pv, start + i, g[i]);
    });
}

Var concat(std::span<const Var> parts) {
    if (parts.empty()) throw ContractError("concat of zero parts");
    Tape& t = *parts[0].tape;
    int64_t total = 0;
    std::vector<uint32_t> ids;
    std::vector<int64_t> sizes;
    ids.reserve(parts.size());
    for (const Var& p : parts) {
        check_same_tape(parts[0], p, "concat");
        sizes.push_back(t.value(p).size());
        total += sizes.back();
        ids.push_back(p.id);
    }
    Tensor out = Tensor::zeros({total});
    int64_t off = 0;
    for (size_t k = 0; k < parts.size(); ++k) {
        const Tensor& pv = t.value(parts[k]);
        for (int64_t i = 0; i < pv.size(); ++i) out[off + i] = pv[i];
        off += pv.size();
    }
    return t.emit(std::move(out), ids,
                  [ids, sizes](Tape& tp, uint32_t self) {
                      const Tensor& g = tp.node_grad(self);
                      int64_t off2 = 0;
                      for (size_t k = 0; k < ids.size(); ++k) {
                          for (int64_t i = 0; i < sizes[k]; ++i)
                              tp.accumulate_at(ids[k], i, g[off2 + i]);
                          off2 += sizes[k];
                      }
                  });
}

Var concat_columns(std::span<const Var> columns) {
    if (columns.empty()) throw ContractError("concat_columns of zero columns");
    Tape& t = *columns[0].tape;
    const int64_t d = t.value(columns[0]).size();
    const int64_t n = static_cast<int64_t>(columns.size());
    Tensor out = Tensor::matrix(d, n);
    std::vector<uint32_t> ids;
    ids.reserve(columns.size());
    for (int64_t j = 0; j < n; ++j) {
        const Tensor& cv = t.value(columns[static_cast<size_t>(j)]);
        if (cv.size() != d)
            throw DimensionError("concat_columns: column " + std::to_string(j) +
                                 " has size " + std::to_string(cv.size()));
        for (int64_t i = 0; i < d; ++i) out.at(i, j) = cv[i];
        ids.push_back(columns[static_cast<size_t>(j)].id);
    }
    return t.emit(std::move(out), ids, [ids, d](Tape& tp, uint32_t self) {
        const Tensor& g = tp.node_grad(self);
        const int64_t n2 = g.cols();
        for (int64_t j = 0; j < n2; ++j)
            for (int64_t i = 0; i < d; ++i)
                tp.accumulate_at(ids[static_cast<size_t>(j)], i, g.at(i, j));
    });
}

Var stack_rows(std::span<const Var> mats) {
    if (mats.empty()) throw ContractError("stack_rows of zero matrices");
    Tape& t = *mats[0].tape;
    const int64_t c = t.value(mats[0]).cols();
    int64_t total_rows = 0;
    std::vector<uint32_t> ids;
    std::vector<int64_t> rows_of;
    for (const Var& m : mats) {
        check_same_tape(mats[0], m, "stack_rows");
        if (t.value(m).cols() != c) throw DimensionError("stack_rows: column count mismatch");
        rows_of.push_back(t.value(m).rows());
        total_rows += rows_of.back();
        ids.push_back(m.id);
    }
    Tensor out = Tensor::matrix(total_rows, c);
    int64_t r0 = 0;
    for (const Var& m : mats) {
        const Tensor& mv = t.value(m);
        for (int64_t i = 0; i < mv.rows(); ++i)
            for (int64_t j = 0; j < c; ++j) out.at(r0 + i, j) = mv.at(i, j);
        r0 += mv.rows();
    }
    return t.emit(std::move(out), ids, [ids, rows_of, c](Tape& tp, uint32_t self) {
        const Tensor& g = tp.node_grad(self);
        int64_t r = 0;
        for (size_t k = 0; k < ids.size(); ++k) {
            for (int64_t i = 0; i < rows_of[k]; ++i)
                for (int64_t j = 0; j < c; ++j)
                    tp.accumulate_at(ids[k], i * c + j, g.at(r + i, j));
            r += rows_of[k];
        }
    });
}

Var replace_elem(Var v, int64_t i, Var s) {
    check_same_tape(v, s, "replace_elem");
    Tape& t = *v.tape;
    Tensor out = t.value(v);
    if (i < 0 || i >= out.size()) throw ContractError("replace_elem index out of range");
    out[i] = t.value(s).item();
    const uint32_t pv = v.id, ps = s.id;
    return t.emit(std::move(out), {pv, ps}, [pv, ps, i](Tape& tp, uint32_t self) {
        Tensor g = tp.node_grad(self);
        tp.accumulate(ps, Tensor::scalar(g[i]));
        g[i] = 0.0;
        tp.accumulate(pv, g);
    });
}

Var reshape(Var v, std::vector<int64_t> shape) {
    Tape& t = *v.tape;
    Tensor out = t.value(v).reshaped(shape);
    const uint32_t pv = v.id;
    return t.emit(std::move(out), {pv}, [pv](Tape& tp, uint32_t self) {
        tp.accumulate(pv, tp.node_grad(self).reshaped(tp.value(Var{&tp, pv}).shape()));
    });
}

Var vec_to_columns(Var v, int64_t e, int64_t d) {
    Tape& t = *v.tape;
    const Tensor& vv = t.value(v);
    if (vv.size() != e * d)
        throw DimensionError("vec_to_columns: size " + std::to_string(vv.size()) +
                             " != " + std::to_string(e) + "*" + std::to_string(d));
    Tensor out = Tensor::matrix(e, d);
    for (int64_t j = 0; j < d; ++j)
        for (int64_t r = 0; r < e; ++r) out.at(r, j) = vv[j * e + r];
    const uint32_t pv = v.id;
    return t.emit(std::move(out), {pv}, [pv, e, d](Tape& tp, uint32_t self) {
        const Tensor& g = tp.node_grad(self);
        for (int64_t j = 0; j < d; ++j)
            for (int64_t r = 0; r < e; ++r) tp.accumulate_at(pv, j * e + r, g.at(r, j));
    });
}

Var columns_to_vec(Var m) {
    Tape& t = *m.tape;
    const Tensor& mv = t.value(m);
    const int64_t e = mv.rows(), d = mv.cols();
    Tensor out = Tensor::zeros({e * d});
    for (int64_t j = 0; j < d; ++j)
        for (int64_t r = 0; r < e; ++r) out[j * e + r] = mv.at(r, j);
    const uint32_t pm = m.id;
    return t.emit(std::move(out), {pm}, [pm, e, d](Tape& tp, uint32_t self) {
        const Tensor& g = tp.node_grad(self);
        for (int64_t j = 0; j < d; ++j)
            for (int64_t r = 0; r < e; ++r) tp.accumulate_at(pm, r * d + j, g[j * e + r]);
    });
}

Var dropout(Var v, double p, Rng& rng, bool training) {
    Tape& t = *v.tape;
    if (p < 0.0 || p > 1.0) throw DomainError("dropout probability outside [0, 1]");
    if (!training || p == 0.0) return v;
    const Tensor& vv = t.value(v);
    Tensor mask = Tensor::zeros(vv.shape());
    if (p < 1.0) {
        const double keep_scale = 1.0 / (1.0 - p);
        for (int64_t i = 0; i < mask.size(); ++i)
            mask[i] = rng.uniform01() < p ? 0.0 : keep_scale;
    }
    Tensor out = hopular::mul(vv, mask);
    const uint32_t pv = v.id;
    return t.emit(std::move(out), {pv}, [pv, mask](Tape& tp, uint32_t self) {
        tp.accumulate(pv, hopular::mul(tp.node_grad(self), mask));
    });
}

Var detach(Var v) { return v.tape->constant(v.tape->value(v)); }

double finite_diff_check(const std::function<Var(Tape&, Var)>& f, const Tensor& x, double eps) {
    if (!(eps >= 1e-7 && eps <= 1e-3))
        throw ContractError("finite_diff_check: eps must lie in [1e-7, 1e-3]");

    Tape tape;
    Var xv = tape.leaf(x);
    Var y = f(tape, xv);
    if (!tape.value(y).is_scalar()) throw ContractError("finite_diff_check: f must be scalar");
    if (!std::isfinite(tape.value(y).item()))
        throw DomainError("finite_diff_check: f(x) is not finite");
    tape.backward(y);
    const Tensor analytic = tape.grad(xv);

    auto eval = [&f](const Tensor& point) {
        Tape t2;
        Var pv = t2.constant(point);
        const double val = t2.value(f(t2, pv)).item();
        if (!std::isfinite(val)) throw DomainError("finite_diff_check: perturbed f not finite");
        return val;
    };

    double max_rel = 0.0;
    for (int64_t i = 0; i < x.size(); ++i) {
        Tensor xp = x, xm = x;
        xp[i] += eps;
        xm[i] -= eps;
        const double central = (eval(xp) - eval(xm)) / (2.0 * eps);
        const double a = analytic[i];
        const double rel = std::abs(a - central) / (std::abs(a) + std::abs(central) + 1e-12);
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

}  // namespace hopular
