#include "vecplan/selector.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace vecplan {

namespace {

std::string mask_key(const StateMask& a, const StateMask& b) {
    std::string key;
    key.reserve(a.size() + b.size() + 1);
    key.append(reinterpret_cast<const char*>(a.data()), a.size());
    key.push_back('|');
    key.append(reinterpret_cast<const char*>(b.data()), b.size());
    return key;
}

}  // namespace

std::vector<PairExample> build_pairs(const SequenceModel& model,
                                     const std::vector<EstimatedTrace>& estimates,
                                     const PairConfig& pc) {
    const size_t num_actions = model.num_actions();
    std::vector<PairExample> out;
    std::unordered_map<std::string, size_t> merged;   // (from,to) -> index in out
    std::unordered_map<std::string, Vec> vec_cache;   // decoded state -> g(state)

    auto state_vector = [&](const StateMask& s) -> const Vec& {
        std::string key(reinterpret_cast<const char*>(s.data()), s.size());
        auto it = vec_cache.find(key);
        if (it == vec_cache.end()) it = vec_cache.emplace(key, bridge_state(model, s)).first;
        return it->second;
    };

    for (size_t ti = 0; ti < estimates.size(); ++ti) {
        const EstimatedTrace& est = estimates[ti];
        const size_t n = est.actions.size();
        if (n == 0) continue;

        // adjacent and goal-directed pairs always survive the budget
        std::vector<std::pair<size_t, size_t>> chosen;
        for (size_t i = 0; i < n; ++i) chosen.emplace_back(i, i + 1);
        for (size_t i = 0; i + 1 < n; ++i) chosen.emplace_back(i, n);

        const size_t budget = pc.budget_per_steps * n;
        if (chosen.size() < budget && n >= 2) {
            std::vector<std::pair<size_t, size_t>> rest;  // j > i+1, j < n
            for (size_t i = 0; i + 2 <= n; ++i)
                for (size_t j = i + 2; j < n; ++j) rest.emplace_back(i, j);
            const size_t room = budget - chosen.size();
            if (room >= rest.size()) {
                chosen.insert(chosen.end(), rest.begin(), rest.end());
            } else {
                Rng rng(derive_seed(pc.seed, ti));
                std::vector<size_t> picks = rng.sample_indices(rest.size(), room);
                std::sort(picks.begin(), picks.end());
                for (size_t p : picks) chosen.push_back(rest[p]);
            }
        }

        for (auto [i, j] : chosen) {
            const StateMask& from = est.states[i];
            const StateMask& to = est.states[j];
            const auto label = static_cast<size_t>(est.actions[i]);
            std::string key = mask_key(from, to);
            auto it = merged.find(key);
            if (it == merged.end()) {
                PairExample ex;
                ex.from = from;
                ex.to = to;
                ex.from_vector = state_vector(from);
                ex.to_vector = state_vector(to);
                ex.labels.assign(num_actions, 0);
                ex.labels[label] = 1;
                merged.emplace(std::move(key), out.size());
                out.push_back(std::move(ex));
            } else {
                out[it->second].labels[label] = 1;
            }
        }
    }
    return out;
}

SelectorNet make_selector(size_t k, size_t num_actions, uint64_t seed,
                          const std::vector<size_t>& hidden, double init_bound) {
    SelectorNet sel;
    sel.k = k;
    MlpSpec spec{2 * k, hidden, num_actions, true, Head::Sigmoid};
    sel.net = Mlp(spec);
    Rng rng(derive_seed(seed, 4));
    sel.net.init(init_bound, rng);
    return sel;
}

TrainResult train_selector(SelectorNet& sel, const std::vector<PairExample>& pairs,
                           const TrainConfig& tc) {
    if (pairs.empty()) throw std::invalid_argument("train_selector: empty pair set");
    TrainResult result;
    if (tc.epochs == 0) return result;

    const size_t in_dim = sel.net.spec().in_dim;
    const size_t num_actions = sel.net.spec().out_dim;
    const size_t k = sel.k;

    Mlp grads(sel.net.spec());
    grads.zero();
    std::vector<TensorRef> prefs = collect_params(sel.net, "h");
    std::vector<TensorRef> grefs = collect_params(grads, "h");
    Adam opt(total_size(prefs), tc.lr);
    const std::vector<uint8_t> all_on(num_actions, 1);

    for (size_t epoch = 0; epoch < tc.epochs; ++epoch) {
        std::vector<size_t> order(pairs.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng shuffler(derive_seed(tc.seed, 1000 + epoch));
        shuffler.shuffle(order);

        double loss_sum = 0.0;
        size_t entry_count = 0;
        for (size_t start = 0; start < order.size(); start += tc.batch) {
            const size_t b = std::min(tc.batch, order.size() - start);
            Mat x(b, in_dim), targets(b, num_actions);
            for (size_t r = 0; r < b; ++r) {
                const PairExample& ex = pairs[order[start + r]];
                std::copy(ex.from_vector.begin(), ex.from_vector.end(), x.row(r));
                std::copy(ex.to_vector.begin(), ex.to_vector.end(), x.row(r) + k);
                for (size_t a = 0; a < num_actions; ++a)
                    targets.at(r, a) = ex.labels[a] ? 1.0 : 0.0;
            }

            Mlp::Cache cache;
            sel.net.forward(x, cache);
            Mat dz(b, num_actions);
            double batch_loss = 0.0;
            const double denom = static_cast<double>(b * num_actions);
            for (size_t r = 0; r < b; ++r) {
                Vec logits(cache.z.row(r), cache.z.row(r) + num_actions);
                Vec trow(targets.row(r), targets.row(r) + num_actions);
                LogitBceSums sums = bce_with_logits(logits, trow, all_on);
                batch_loss += sums.loss_sum;
                for (size_t a = 0; a < num_actions; ++a)
                    dz.at(r, a) = sums.grad_sum[a] / denom;
            }
            if (!std::isfinite(batch_loss))
                throw NonFiniteLoss("selector loss became non-finite (epoch " +
                                        std::to_string(epoch) + ")",
                                    epoch, order[start]);
            loss_sum += batch_loss;
            entry_count += b * num_actions;

            grads.zero();
            sel.net.backward_from_preact(cache, dz, grads);
            opt.step(prefs, grefs);
        }

        result.epoch_loss.push_back(loss_sum / static_cast<double>(entry_count));
        ++result.epochs_run;
        if (tc.stop_tol > 0 && result.epoch_loss.back() < tc.stop_tol) {
            result.stopped_early = true;
            break;
        }
    }
    return result;
}

std::vector<Recommendation> recommend(const SelectorNet& sel, const Vec& from_vec,
                                      const Vec& goal_vec, size_t k_top) {
    if (from_vec.size() != sel.k || goal_vec.size() != sel.k)
        throw ShapeMismatch("recommend: state vector width mismatch");
    if (k_top == 0) throw std::invalid_argument("recommend: k_top must be at least 1");
    Vec input;
    input.reserve(2 * sel.k);
    input.insert(input.end(), from_vec.begin(), from_vec.end());
    input.insert(input.end(), goal_vec.begin(), goal_vec.end());
    Vec conf = sel.net.forward(input);

    std::vector<Recommendation> ranked(conf.size());
    for (size_t a = 0; a < conf.size(); ++a)
        ranked[a] = {static_cast<ActionId>(a), conf[a]};
    std::sort(ranked.begin(), ranked.end(), [](const Recommendation& l, const Recommendation& r) {
        if (l.confidence != r.confidence) return l.confidence > r.confidence;
        return l.action < r.action;
    });
    ranked.resize(std::min(k_top, ranked.size()));
    return ranked;
}

void save_selector(const std::string& path, const SelectorNet& sel) {
    Checkpoint ck;
    ck.meta.emplace_back("kind", "action-selector");
    ck.meta.emplace_back("k", std::to_string(sel.k));
    ck.meta.emplace_back("out_dim", std::to_string(sel.net.spec().out_dim));
    std::string hidden;
    for (size_t h : sel.net.spec().hidden) {
        if (!hidden.empty()) hidden += ',';
        hidden += std::to_string(h);
    }
    ck.meta.emplace_back("hidden", hidden);
    add_mlp(ck, sel.net, "h");
    write_checkpoint_file(path, ck);
}

SelectorNet load_selector(const std::string& path, size_t k, size_t num_actions) {
    Checkpoint ck = read_checkpoint_file(path);
    const std::string* kind = ck.find_meta("kind");
    if (!kind || *kind != "action-selector")
        throw CheckpointError("checkpoint at '" + path + "' is not an action selector");
    const std::string* kstr = ck.find_meta("k");
    const std::string* out_str = ck.find_meta("out_dim");
    const std::string* hidden_str = ck.find_meta("hidden");
    if (!kstr || !out_str || !hidden_str)
        throw CheckpointError("selector checkpoint is missing shape metadata");
    SelectorNet sel;
    sel.k = static_cast<size_t>(std::stoull(*kstr));
    if (sel.k != k) throw CheckpointError("selector was trained for a different vector width");
    if (static_cast<size_t>(std::stoull(*out_str)) != num_actions)
        throw CheckpointError("selector was trained for a different action count");
    std::vector<size_t> hidden;
    size_t pos = 0;
    while (pos < hidden_str->size()) {
        size_t next = hidden_str->find(',', pos);
        if (next == std::string::npos) next = hidden_str->size();
        hidden.push_back(static_cast<size_t>(std::stoull(hidden_str->substr(pos, next - pos))));
        pos = next + 1;
    }
    sel.net = Mlp(MlpSpec{2 * k, hidden, num_actions, true, Head::Sigmoid});
    load_mlp(ck, sel.net, "h");
    return sel;
}

std::string pair_report(const std::vector<PairExample>& pairs, const GroundDomain& dom,
                        size_t max_pairs) {
    std::string out;
    const size_t shown = std::min(max_pairs, pairs.size());
    for (size_t i = 0; i < shown; ++i) {
        const PairExample& ex = pairs[i];
        auto names = [&](const StateMask& m) {
            std::string s = "{";
            bool first = true;
            for (size_t j = 0; j < m.size(); ++j)
                if (m[j]) {
                    if (!first) s += ", ";
                    s += dom.prop(static_cast<PropId>(j)).name;
                    first = false;
                }
            return s + "}";
        };
        out += names(ex.from) + " -> " + names(ex.to) + " : ";
        bool first = true;
        for (size_t a = 0; a < ex.labels.size(); ++a)
            if (ex.labels[a]) {
                if (!first) out += ", ";
                out += dom.action(static_cast<ActionId>(a)).name;
                first = false;
            }
        out += "\n";
    }
    if (shown < pairs.size())
        out += "... " + std::to_string(pairs.size() - shown) + " more\n";
    return out;
}

}  // namespace vecplan
