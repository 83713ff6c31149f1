#include "vecplan/psg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <thread>

#include "vecplan/rng.hpp"

namespace vecplan {

namespace {

Vec mask_to_attrs(const StateMask& m) {
    Vec a(m.size());
    for (size_t i = 0; i < m.size(); ++i) a[i] = m[i] ? 1.0 : 0.0;
    return a;
}

// [p_1, e_1, p_2, e_2, ...]: one slot group of k+1 per proposition
Mat interleave_state_input(const Mat& prop_vecs, const Vec& attrs) {
    const size_t u = prop_vecs.rows, k = prop_vecs.cols;
    Mat x(1, u * (k + 1));
    double* r = x.row(0);
    for (size_t j = 0; j < u; ++j) {
        const double* p = prop_vecs.row(j);
        std::copy(p, p + k, r + j * (k + 1));
        r[j * (k + 1) + k] = attrs[j];
    }
    return x;
}

// per-proposition rows [e_j, s, p_j, a]
Mat build_edge_input(const Mat& prop_vecs, const Vec& attrs, const Vec& sv, const double* avec,
                     size_t k) {
    const size_t u = prop_vecs.rows;
    Mat x(u, 1 + 3 * k);
    for (size_t j = 0; j < u; ++j) {
        double* r = x.row(j);
        r[0] = attrs[j];
        std::copy(sv.begin(), sv.end(), r + 1);
        const double* p = prop_vecs.row(j);
        std::copy(p, p + k, r + 1 + k);
        std::copy(avec, avec + k, r + 1 + 2 * k);
    }
    return x;
}

// targets and mask for the loss at step t (1-based; t == n is the final step)
void step_targets(const PartialTrace& trace, size_t t, size_t n, size_t universe,
                  bool absent_as_negative, Vec& target, std::vector<uint8_t>& mask) {
    target.assign(universe, 0.0);
    if (t == n) {
        mask.assign(universe, 1);
        for (PropId p : trace.final_state) target[static_cast<size_t>(p)] = 1.0;
        return;
    }
    mask.assign(universe, absent_as_negative ? 1 : 0);
    for (PropId p : trace.observations[t - 1]) {
        target[static_cast<size_t>(p)] = 1.0;
        mask[static_cast<size_t>(p)] = 1;
    }
}

}  // namespace

SequenceModel::SequenceModel(const GroundDomain& dom, PsgConfig c, uint64_t seed)
    : cfg(std::move(c)), domain_fp(dom.fingerprint()) {
    const size_t u = dom.num_props(), a = dom.num_actions(), k = cfg.k;
    prop_vecs = Mat(u, k);
    action_vecs = Mat(a, k);
    Rng rp(derive_seed(seed, 0)), ra(derive_seed(seed, 1));
    init_uniform(prop_vecs, cfg.init_bound, rp);
    init_uniform(action_vecs, cfg.init_bound, ra);

    MlpSpec sspec;
    sspec.in_dim = u * (k + 1);
    sspec.hidden = cfg.state_hidden;
    sspec.out_dim = k;
    sspec.layernorm = true;
    sspec.head = Head::Identity;
    state_net = Mlp(sspec);
    Rng rs(derive_seed(seed, 2));
    state_net.init(cfg.init_bound, rs);

    MlpSpec espec;
    espec.in_dim = 1 + 3 * k;
    espec.hidden = cfg.edge_hidden;
    espec.out_dim = 1;
    espec.layernorm = true;
    espec.head = Head::Sigmoid;
    edge_net = Mlp(espec);
    Rng re(derive_seed(seed, 3));
    edge_net.init(cfg.init_bound, re);
}

Vec SequenceModel::state_vec(const Vec& attrs) const {
    if (attrs.size() != num_props()) throw ShapeMismatch("state_vec: attribute count disagrees");
    return state_net.forward(interleave_state_input(prop_vecs, attrs)).data;
}

Vec SequenceModel::state_vec(const StateMask& s) const { return state_vec(mask_to_attrs(s)); }

Vec SequenceModel::step_probs(const Vec& attrs, const Vec& sv, ActionId a) const {
    if (attrs.size() != num_props()) throw ShapeMismatch("step_probs: attribute count disagrees");
    if (sv.size() != cfg.k) throw ShapeMismatch("step_probs: state vector width disagrees");
    if (a < 0 || static_cast<size_t>(a) >= num_actions())
        throw ShapeMismatch("step_probs: action id out of range");
    Mat x = build_edge_input(prop_vecs, attrs, sv, action_vecs.row(static_cast<size_t>(a)), cfg.k);
    return edge_net.forward(x).data;
}

StateMask SequenceModel::decode(const Vec& probs) const {
    StateMask m(probs.size());
    for (size_t i = 0; i < probs.size(); ++i)
        m[i] = probs[i] >= cfg.decode_threshold ? 1 : 0;
    return m;
}

std::pair<StateMask, Vec> SequenceModel::transition(const StateMask& s, ActionId a) const {
    const Vec attrs = mask_to_attrs(s);
    const Vec sv = state_vec(attrs);
    StateMask next = decode(step_probs(attrs, sv, a));
    Vec next_sv = state_vec(mask_to_attrs(next));
    return {std::move(next), std::move(next_sv)};
}

EstimatedTrace unroll_steps(const StepFn& step, const PartialTrace& trace, size_t universe,
                            double threshold, UnrollMode mode, bool teacher_forcing) {
    const size_t n = trace.actions.size();
    EstimatedTrace est;
    est.actions = trace.actions;
    est.states.reserve(n + 1);
    est.probs.reserve(n + 1);

    Vec attrs = mask_to_attrs(to_mask(trace.initial, universe));
    est.states.push_back(to_mask(trace.initial, universe));
    est.probs.push_back(attrs);

    for (size_t t = 1; t <= n; ++t) {
        Vec probs = step(attrs, trace.actions[t - 1]);
        StateMask decoded(universe);
        for (size_t j = 0; j < universe; ++j) decoded[j] = probs[j] >= threshold ? 1 : 0;
        if (mode == UnrollMode::Training) {
            attrs = probs;
            if (teacher_forcing && t < n)
                for (PropId p : trace.observations[t - 1]) attrs[static_cast<size_t>(p)] = 1.0;
        } else {
            attrs = mask_to_attrs(decoded);
        }
        est.probs.push_back(std::move(probs));
        est.states.push_back(std::move(decoded));
    }
    // endpoints are observed; the model never overrides them
    est.states.front() = to_mask(trace.initial, universe);
    if (n > 0) est.states.back() = to_mask(trace.final_state, universe);
    return est;
}

EstimatedTrace SequenceModel::unroll(const PartialTrace& trace, UnrollMode mode) const {
    StepFn step = [this](const Vec& attrs, ActionId a) {
        return step_probs(attrs, state_vec(attrs), a);
    };
    return unroll_steps(step, trace, num_props(), cfg.decode_threshold, mode,
                        cfg.teacher_forcing);
}

std::vector<TensorRef> SequenceModel::params(const std::string& prefix) {
    std::vector<TensorRef> refs;
    refs.push_back({prefix + ".props", prop_vecs.data.data(), prop_vecs.data.size()});
    refs.push_back({prefix + ".actions", action_vecs.data.data(), action_vecs.data.size()});
    for (TensorRef& r : collect_params(state_net, prefix + ".state")) refs.push_back(r);
    for (TensorRef& r : collect_params(edge_net, prefix + ".edge")) refs.push_back(r);
    return refs;
}

SequenceGrads::SequenceGrads(const SequenceModel& m)
    : prop_vecs(m.prop_vecs.rows, m.prop_vecs.cols),
      action_vecs(m.action_vecs.rows, m.action_vecs.cols),
      state_net(m.state_net.spec()),
      edge_net(m.edge_net.spec()) {
    state_net.zero();
    edge_net.zero();
}

void SequenceGrads::zero() {
    prop_vecs.zero();
    action_vecs.zero();
    state_net.zero();
    edge_net.zero();
}

void SequenceGrads::add_scaled(const SequenceGrads& other, double scale) {
    std::vector<TensorRef> mine = params("g");
    std::vector<TensorRef> theirs = const_cast<SequenceGrads&>(other).params("g");
    for (size_t r = 0; r < mine.size(); ++r)
        for (size_t i = 0; i < mine[r].size; ++i) mine[r].data[i] += scale * theirs[r].data[i];
}

std::vector<TensorRef> SequenceGrads::params(const std::string& prefix) {
    std::vector<TensorRef> refs;
    refs.push_back({prefix + ".props", prop_vecs.data.data(), prop_vecs.data.size()});
    refs.push_back({prefix + ".actions", action_vecs.data.data(), action_vecs.data.size()});
    for (TensorRef& r : collect_params(state_net, prefix + ".state")) refs.push_back(r);
    for (TensorRef& r : collect_params(edge_net, prefix + ".edge")) refs.push_back(r);
    return refs;
}

SequenceLossResult sequence_loss(const SequenceModel& model, const PartialTrace& trace,
                                 SequenceGrads* grads) {
    const size_t n = trace.actions.size();
    const size_t u = model.num_props(), k = model.cfg.k;
    SequenceLossResult result;
    if (n == 0) return result;

    // soft forward with caches
    std::vector<Vec> attrs(n);  // inputs to each step; attrs[t-1] feeds step t
    std::vector<std::vector<uint8_t>> forced(n);
    std::vector<Mlp::Cache> scache(n);
    std::vector<Mlp::Cache> ecache(n + 1);
    std::vector<Vec> targets(n + 1);
    std::vector<std::vector<uint8_t>> masks(n + 1);

    attrs[0] = mask_to_attrs(to_mask(trace.initial, u));
    size_t count = 0;
    double loss_sum = 0.0;
    for (size_t t = 1; t <= n; ++t) {
        Mat sx = interleave_state_input(model.prop_vecs, attrs[t - 1]);
        Mat sv = model.state_net.forward(sx, scache[t - 1]);
        Mat ex = build_edge_input(model.prop_vecs, attrs[t - 1], sv.data,
                                  model.action_vecs.row(static_cast<size_t>(trace.actions[t - 1])),
                                  k);
        Mat probs = model.edge_net.forward(ex, ecache[t]);

        step_targets(trace, t, n, u, model.cfg.absent_as_negative, targets[t], masks[t]);
        for (size_t j = 0; j < u; ++j) {
            if (!masks[t][j]) continue;
            ++count;
            loss_sum += bce_logit_term(ecache[t].z.data[j], targets[t][j]);
        }
        if (t < n) {
            attrs[t] = probs.data;
            forced[t].assign(u, 0);
            if (model.cfg.teacher_forcing) {
                for (PropId p : trace.observations[t - 1]) {
                    attrs[t][static_cast<size_t>(p)] = 1.0;
                    forced[t][static_cast<size_t>(p)] = 1;
                }
            }
        }
    }
    result.count = count;
    result.loss = loss_sum / static_cast<double>(std::max<size_t>(1, count));
    if (!grads) return result;

    // reverse pass: per-step logit gradients carry both the direct loss term
    // and whatever flowed back into this step's output probabilities
    const double inv = 1.0 / static_cast<double>(std::max<size_t>(1, count));
    Vec dattrs(u, 0.0);  // gradient at attrs[t-1] while processing step t
    Vec dattrs_next;     // gradient at attrs[t] accumulated from steps > t
    Mat dz(u, 1);
    Mat dsv(1, k);
    for (size_t t = n; t >= 1; --t) {
        for (size_t j = 0; j < u; ++j) {
            double g = 0.0;
            if (masks[t][j])
                g += (ecache[t].y.data[j] - targets[t][j]) * inv;
            if (t < n && !dattrs_next.empty() && !(model.cfg.teacher_forcing && forced[t][j])) {
                const double p = ecache[t].y.data[j];
                g += dattrs_next[j] * p * (1.0 - p);
            }
            dz.data[j] = g;
        }
        Mat din = model.edge_net.backward_from_preact(ecache[t], dz, grads->edge_net);
        std::fill(dattrs.begin(), dattrs.end(), 0.0);
        dsv.zero();
        double* arow = grads->action_vecs.row(static_cast<size_t>(trace.actions[t - 1]));
        for (size_t j = 0; j < u; ++j) {
            const double* r = din.row(j);
            dattrs[j] += r[0];
            for (size_t i = 0; i < k; ++i) dsv.data[i] += r[1 + i];
            double* prow = grads->prop_vecs.row(j);
            for (size_t i = 0; i < k; ++i) prow[i] += r[1 + k + i];
            for (size_t i = 0; i < k; ++i) arow[i] += r[1 + 2 * k + i];
        }
        Mat dsx = model.state_net.backward_from_preact(scache[t - 1], dsv, grads->state_net);
        const double* dr = dsx.row(0);
        for (size_t j = 0; j < u; ++j) {
            double* prow = grads->prop_vecs.row(j);
            for (size_t i = 0; i < k; ++i) prow[i] += dr[j * (k + 1) + i];
            dattrs[j] += dr[j * (k + 1) + k];
        }
        dattrs_next = dattrs;  // becomes the downstream gradient for step t-1
    }
    return result;
}

std::vector<std::tuple<size_t, PropId, double>> sequence_loss_terms(const SequenceModel& model,
                                                                    const PartialTrace& trace) {
    const size_t n = trace.actions.size();
    const size_t u = model.num_props();
    std::vector<std::tuple<size_t, PropId, double>> terms;
    if (n == 0) return terms;
    StepFn step = [&model](const Vec& a, ActionId act) {
        return model.step_probs(a, model.state_vec(a), act);
    };
    EstimatedTrace est =
        unroll_steps(step, trace, u, model.cfg.decode_threshold, UnrollMode::Training,
                     model.cfg.teacher_forcing);
    Vec target;
    std::vector<uint8_t> mask;
    for (size_t t = 1; t <= n; ++t) {
        step_targets(trace, t, n, u, model.cfg.absent_as_negative, target, mask);
        for (size_t j = 0; j < u; ++j)
            if (mask[j])
                terms.emplace_back(t, static_cast<PropId>(j), bce_term(est.probs[t][j], target[j]));
    }
    return terms;
}

SequenceLossResult sequence_loss_value(const StepFn& step, const PartialTrace& trace,
                                       size_t universe, bool absent_as_negative,
                                       bool teacher_forcing) {
    const size_t n = trace.actions.size();
    SequenceLossResult r;
    if (n == 0) return r;
    EstimatedTrace est = unroll_steps(step, trace, universe, 0.5, UnrollMode::Training,
                                      teacher_forcing);
    Vec target;
    std::vector<uint8_t> mask;
    for (size_t t = 1; t <= n; ++t) {
        step_targets(trace, t, n, universe, absent_as_negative, target, mask);
        for (size_t j = 0; j < universe; ++j) {
            if (!mask[j]) continue;
            ++r.count;
            r.loss += bce_term(est.probs[t][j], target[j]);
        }
    }
    r.loss /= static_cast<double>(std::max<size_t>(1, r.count));
    return r;
}

TrainResult train(SequenceModel& model, const std::vector<PartialTrace>& data,
                  const TrainConfig& tc) {
    if (data.empty()) throw TraceError("train: empty dataset");
    TrainResult result;
    if (tc.epochs == 0) return result;

    std::vector<TensorRef> prefs = model.params("m");
    Adam adam(total_size(prefs), tc.lr);
    SequenceGrads batch_grads(model);
    std::vector<TensorRef> grefs = batch_grads.params("m");

    const size_t nthreads = std::max<size_t>(1, tc.threads);
    std::vector<SequenceGrads> slot_grads;  // per-trace slots when threaded
    if (nthreads > 1)
        for (size_t i = 0; i < tc.batch; ++i) slot_grads.emplace_back(model);
    SequenceGrads tgrads(model);

    std::vector<size_t> order(data.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (size_t epoch = 0; epoch < tc.epochs; ++epoch) {
        Rng shuffler(derive_seed(tc.seed, 1000 + epoch));
        shuffler.shuffle(order);
        double epoch_loss = 0.0;
        for (size_t start = 0; start < order.size(); start += tc.batch) {
            const size_t b = std::min(tc.batch, order.size() - start);
            const double scale = 1.0 / static_cast<double>(b);
            batch_grads.zero();
            std::vector<double> losses(b, 0.0);
            std::vector<size_t> bad(b, 0);
            if (nthreads == 1) {
                for (size_t i = 0; i < b; ++i) {
                    tgrads.zero();
                    SequenceLossResult r = sequence_loss(model, data[order[start + i]], &tgrads);
                    if (!std::isfinite(r.loss))
                        throw NonFiniteLoss("training loss became non-finite (epoch " +
                                                std::to_string(epoch) + ", trace " +
                                                std::to_string(order[start + i]) + ")",
                                            epoch, order[start + i]);
                    losses[i] = r.loss;
                    batch_grads.add_scaled(tgrads, scale);
                }
            } else {
                const size_t workers = std::min(nthreads, b);
                std::vector<std::thread> pool;
                for (size_t w = 0; w < workers; ++w) {
                    pool.emplace_back([&, w]() {
                        for (size_t i = w; i < b; i += workers) {
                            slot_grads[i].zero();
                            SequenceLossResult r =
                                sequence_loss(model, data[order[start + i]], &slot_grads[i]);
                            losses[i] = r.loss;
                            if (!std::isfinite(r.loss)) bad[i] = 1;
                        }
                    });
                }
                for (std::thread& th : pool) th.join();
                for (size_t i = 0; i < b; ++i)
                    if (bad[i])
                        throw NonFiniteLoss("training loss became non-finite (epoch " +
                                                std::to_string(epoch) + ", trace " +
                                                std::to_string(order[start + i]) + ")",
                                            epoch, order[start + i]);
                for (size_t i = 0; i < b; ++i) batch_grads.add_scaled(slot_grads[i], scale);
            }
            for (size_t i = 0; i < b; ++i) epoch_loss += losses[i];
            adam.step(prefs, grefs);
        }
        epoch_loss /= static_cast<double>(data.size());
        result.epoch_loss.push_back(epoch_loss);
        ++result.epochs_run;
        if (!std::isfinite(epoch_loss))
            throw NonFiniteLoss("epoch mean loss became non-finite (epoch " +
                                    std::to_string(epoch) + ")",
                                epoch, 0);
        if (tc.stop_tol > 0.0 && epoch_loss < tc.stop_tol) {
            result.stopped_early = true;
            break;
        }
    }
    return result;
}

namespace {

std::string sizes_to_string(const std::vector<size_t>& v) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(v[i]);
    }
    return s;
}

std::vector<size_t> sizes_from_string(const std::string& s) {
    std::vector<size_t> v;
    size_t pos = 0;
    while (pos < s.size()) {
        size_t next = s.find(',', pos);
        if (next == std::string::npos) next = s.size();
        v.push_back(static_cast<size_t>(std::stoull(s.substr(pos, next - pos))));
        pos = next + 1;
    }
    return v;
}

std::string real_to_string(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

const std::string& need_meta(const Checkpoint& ck, const std::string& key) {
    const std::string* v = ck.find_meta(key);
    if (!v) throw CheckpointError("checkpoint is missing metadata '" + key + "'");
    return *v;
}

}  // namespace

Checkpoint model_checkpoint(const SequenceModel& m,
                            std::vector<std::pair<std::string, std::string>> extra_meta) {
    Checkpoint ck;
    ck.meta.emplace_back("domain_fp", std::to_string(m.domain_fp));
    ck.meta.emplace_back("k", std::to_string(m.cfg.k));
    ck.meta.emplace_back("state_hidden", sizes_to_string(m.cfg.state_hidden));
    ck.meta.emplace_back("edge_hidden", sizes_to_string(m.cfg.edge_hidden));
    ck.meta.emplace_back("decode_threshold", real_to_string(m.cfg.decode_threshold));
    ck.meta.emplace_back("init_bound", real_to_string(m.cfg.init_bound));
    ck.meta.emplace_back("absent_as_negative", m.cfg.absent_as_negative ? "1" : "0");
    ck.meta.emplace_back("teacher_forcing", m.cfg.teacher_forcing ? "1" : "0");
    for (auto& kv : extra_meta) ck.meta.push_back(std::move(kv));
    ck.add("props", {m.prop_vecs.rows, m.prop_vecs.cols}, m.prop_vecs.data);
    ck.add("actions", {m.action_vecs.rows, m.action_vecs.cols}, m.action_vecs.data);
    add_mlp(ck, m.state_net, "state");
    add_mlp(ck, m.edge_net, "edge");
    return ck;
}

void save_model(const std::string& path, const SequenceModel& m,
                std::vector<std::pair<std::string, std::string>> extra_meta) {
    Checkpoint ck = model_checkpoint(m, std::move(extra_meta));
    ck.meta.insert(ck.meta.begin(), {"kind", "sequence-model"});
    write_checkpoint_file(path, ck);
}

SequenceModel model_from_checkpoint(const Checkpoint& ck, const GroundDomain& dom) {
    const uint64_t fp = std::stoull(need_meta(ck, "domain_fp"));
    if (fp != dom.fingerprint())
        throw CheckpointError("checkpoint was trained on a different domain (fingerprint " +
                              std::to_string(fp) + " != " + std::to_string(dom.fingerprint()) +
                              ")");
    PsgConfig cfg;
    cfg.k = static_cast<size_t>(std::stoull(need_meta(ck, "k")));
    cfg.state_hidden = sizes_from_string(need_meta(ck, "state_hidden"));
    cfg.edge_hidden = sizes_from_string(need_meta(ck, "edge_hidden"));
    cfg.decode_threshold = std::stod(need_meta(ck, "decode_threshold"));
    cfg.init_bound = std::stod(need_meta(ck, "init_bound"));
    cfg.absent_as_negative = need_meta(ck, "absent_as_negative") == "1";
    cfg.teacher_forcing = need_meta(ck, "teacher_forcing") == "1";

    SequenceModel m(dom, cfg, 0);
    const Checkpoint::Entry* props = ck.find("props");
    const Checkpoint::Entry* actions = ck.find("actions");
    if (!props || !actions) throw CheckpointError("checkpoint is missing embedding tables");
    if (props->data.size() != m.prop_vecs.data.size() ||
        actions->data.size() != m.action_vecs.data.size())
        throw CheckpointError("embedding shapes disagree with the domain");
    m.prop_vecs.data = props->data;
    m.action_vecs.data = actions->data;
    load_mlp(ck, m.state_net, "state");
    load_mlp(ck, m.edge_net, "edge");
    return m;
}

SequenceModel load_model(const std::string& path, const GroundDomain& dom) {
    Checkpoint ck = read_checkpoint_file(path);
    if (need_meta(ck, "kind") != "sequence-model")
        throw CheckpointError("checkpoint at '" + path + "' is not a sequence model");
    return model_from_checkpoint(ck, dom);
}

}  // namespace vecplan
