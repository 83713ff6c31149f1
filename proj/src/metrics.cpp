#include "vecplan/metrics.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <optional>
#include <tuple>

#include "vecplan/extraction.hpp"
#include "vecplan/trace.hpp"

namespace vecplan {

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void append_sizes(std::string& out, const char* key, const std::vector<size_t>& v) {
    out += key;
    out += '=';
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(v[i]);
    }
    out += '\n';
}

void append_train(std::string& out, const char* prefix, const TrainConfig& tc) {
    out += std::string(prefix) + ".epochs=" + std::to_string(tc.epochs) + '\n';
    out += std::string(prefix) + ".batch=" + std::to_string(tc.batch) + '\n';
    out += std::string(prefix) + ".lr=" + fmt_double(tc.lr) + '\n';
    out += std::string(prefix) + ".seed=" + std::to_string(tc.seed) + '\n';
    out += std::string(prefix) + ".stop_tol=" + fmt_double(tc.stop_tol) + '\n';
    out += std::string(prefix) + ".threads=" + std::to_string(tc.threads) + '\n';
}

// Run one stage, rethrowing any failure with the stage name attached.
template <typename Fn>
auto staged(const char* name, Fn&& fn) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

const char kCsvHeader[] =
    "observation_pct,precision,recall,instances_solved,plan_identity_rate,train_loss_final,seeds";

}  // namespace

StateScore score_state(const StateMask& real, const StateMask& estimated) {
    if (real.size() != estimated.size())
        throw ShapeMismatch("score_state: universe mismatch, " + std::to_string(real.size()) +
                            " vs " + std::to_string(estimated.size()));
    StateScore s;
    for (size_t i = 0; i < real.size(); ++i) {
        if (real[i] && estimated[i])
            ++s.tp;
        else if (!real[i] && !estimated[i])
            ++s.tn;
        else if (estimated[i])
            ++s.fp;
        else
            ++s.fn;
    }
    return s;
}

double precision(const StateScore& s) {
    const size_t den = s.tp + s.fp;
    return den == 0 ? 1.0 : static_cast<double>(s.tp) / static_cast<double>(den);
}

double recall(const StateScore& s) {
    const size_t den = s.tp + s.fn;
    return den == 0 ? 1.0 : static_cast<double>(s.tp) / static_cast<double>(den);
}

PrMean aggregate(const std::vector<StateScore>& scores) {
    if (scores.empty()) throw EmptyInput("aggregate: no state scores");
    PrMean m;
    for (const StateScore& s : scores) {
        m.precision += precision(s);
        m.recall += recall(s);
    }
    m.precision /= static_cast<double>(scores.size());
    m.recall /= static_cast<double>(scores.size());
    return m;
}

double instances_solved(const GroundDomain& dom, const std::vector<Instance>& instances,
                        const std::vector<PlanResult>& results) {
    if (instances.size() != results.size())
        throw ShapeMismatch("instances_solved: " + std::to_string(instances.size()) +
                            " instances vs " + std::to_string(results.size()) + " results");
    if (instances.empty()) return 0.0;
    size_t solved = 0;
    for (size_t i = 0; i < instances.size(); ++i)
        if (results[i].outcome == PlanOutcome::Plan &&
            validate_plan(dom, instances[i], results[i].plan).ok)
            ++solved;
    return static_cast<double>(solved) / static_cast<double>(instances.size());
}

double plan_identity_rate(const GroundDomain& dom, const std::vector<Instance>& instances,
                          const std::vector<PlanResult>& results,
                          const std::vector<std::vector<ActionId>>& oracle_plans) {
    if (instances.size() != results.size() || instances.size() != oracle_plans.size())
        throw ShapeMismatch("plan_identity_rate: misaligned inputs");
    size_t credited = 0, identical = 0;
    for (size_t i = 0; i < instances.size(); ++i) {
        if (results[i].outcome != PlanOutcome::Plan ||
            !validate_plan(dom, instances[i], results[i].plan).ok)
            continue;
        ++credited;
        if (results[i].plan == oracle_plans[i]) ++identical;
    }
    return credited == 0 ? 1.0 : static_cast<double>(identical) / static_cast<double>(credited);
}

std::string canonical_config_text(const ExperimentConfig& cfg) {
    std::string out;
    out += "domain.family=" + cfg.domain.family + '\n';
    out += "domain.cargos=" + std::to_string(cfg.domain.cargos) + '\n';
    out += "domain.locations=" + std::to_string(cfg.domain.locations) + '\n';
    out += "domain.packages=" + std::to_string(cfg.domain.packages) + '\n';
    out += "domain.trucks=" + std::to_string(cfg.domain.trucks) + '\n';
    out += "domain.blocks=" + std::to_string(cfg.domain.blocks) + '\n';
    out += "train_traces=" + std::to_string(cfg.train_traces) + '\n';
    out += "test_count=" + std::to_string(cfg.test_count) + '\n';
    out += "observation_pcts=";
    for (size_t i = 0; i < cfg.observation_pcts.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(cfg.observation_pcts[i]);
    }
    out += '\n';
    out += "psg.k=" + std::to_string(cfg.psg.k) + '\n';
    append_sizes(out, "psg.state_hidden", cfg.psg.state_hidden);
    append_sizes(out, "psg.edge_hidden", cfg.psg.edge_hidden);
    out += "psg.decode_threshold=" + fmt_double(cfg.psg.decode_threshold) + '\n';
    out += "psg.init_bound=" + fmt_double(cfg.psg.init_bound) + '\n';
    out += "psg.absent_as_negative=" + std::to_string(cfg.psg.absent_as_negative ? 1 : 0) + '\n';
    out += "psg.teacher_forcing=" + std::to_string(cfg.psg.teacher_forcing ? 1 : 0) + '\n';
    append_train(out, "learner", cfg.learner_train);
    append_sizes(out, "selector_hidden", cfg.selector_hidden);
    out += "pairs.budget_per_steps=" + std::to_string(cfg.pairs.budget_per_steps) + '\n';
    out += "pairs.seed=" + std::to_string(cfg.pairs.seed) + '\n';
    append_train(out, "selector", cfg.selector_train);
    out += "planner.budget=" + std::to_string(cfg.planner.budget) + '\n';
    out += "planner.k_top=" + std::to_string(cfg.planner.k_top) + '\n';
    out += "planner.goal_mode=" + std::to_string(static_cast<int>(cfg.planner.goal_mode)) + '\n';
    out += "data_seed=" + std::to_string(cfg.data_seed) + '\n';
    out += "mask_seed=" + std::to_string(cfg.mask_seed) + '\n';
    out += "model_seed=" + std::to_string(cfg.model_seed) + '\n';
    out += "selector_seed=" + std::to_string(cfg.selector_seed) + '\n';
    return out;
}

uint64_t fnv1a64(std::string_view bytes) {
    uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string seed_bundle(const ExperimentConfig& cfg) {
    return "data=" + std::to_string(cfg.data_seed) + ";mask=" + std::to_string(cfg.mask_seed) +
           ";model=" + std::to_string(cfg.model_seed) +
           ";learner=" + std::to_string(cfg.learner_train.seed) +
           ";pairs=" + std::to_string(cfg.pairs.seed) +
           ";selector=" + std::to_string(cfg.selector_seed) +
           ";selector_train=" + std::to_string(cfg.selector_train.seed);
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    ExperimentReport report;
    report.config_fingerprint = fnv1a64(canonical_config_text(cfg));
    report.seeds = seed_bundle(cfg);

    GroundDomain dom = staged("generate", [&] { return make_domain(cfg.domain); });
    auto [train_insts, test_insts, train_full, test_full] = staged("generate", [&] {
        std::vector<Instance> all =
            gen_instances(cfg.domain, dom, cfg.train_traces + cfg.test_count, cfg.data_seed);
        std::vector<Instance> tr(all.begin(), all.begin() + static_cast<long>(cfg.train_traces));
        std::vector<Instance> te(all.begin() + static_cast<long>(cfg.train_traces), all.end());
        return std::tuple(tr, te, gen_traces(dom, tr), gen_traces(dom, te));
    });

    for (int pct : cfg.observation_pcts) {
        ExperimentCell cell;
        cell.observation_pct = pct;

        std::vector<PartialTrace> masked =
            staged("mask", [&] { return mask_traces(train_full, pct, cfg.mask_seed); });

        SequenceModel model(dom, cfg.psg, cfg.model_seed);
        TrainResult tr = staged("train", [&] { return train(model, masked, cfg.learner_train); });
        cell.train_loss_final = tr.epoch_loss.empty() ? 0.0 : tr.epoch_loss.back();

        LearnedDomainModel lm;
        std::vector<EstimatedTrace> estimates;
        staged("extract", [&] {
            estimates = estimate_traces(model, masked);
            std::vector<size_t> occurrences;
            auto pre = extract_preconditions(estimates, dom.num_actions(), &occurrences);
            lm = LearnedDomainModel{std::move(model), std::move(pre), std::move(occurrences)};
            return 0;
        });

        SelectorNet sel = staged("train-selector", [&] {
            std::vector<PairExample> pairs = build_pairs(lm.model, estimates, cfg.pairs);
            SelectorNet s = make_selector(cfg.psg.k, dom.num_actions(), cfg.selector_seed,
                                          cfg.selector_hidden);
            train_selector(s, pairs, cfg.selector_train);
            return s;
        });

        std::vector<PlanResult> results = staged("plan", [&] {
            std::vector<PlanResult> out;
            out.reserve(test_insts.size());
            for (size_t i = 0; i < test_insts.size(); ++i) {
                StateMask recorded = to_mask(test_full[i].states.back(), dom.num_props());
                out.push_back(plan(lm, sel, test_insts[i], cfg.planner, recorded));
            }
            return out;
        });

        staged("score", [&] {
            std::vector<StateScore> scores;
            for (size_t i = 0; i < test_full.size(); ++i) {
                EstimatedTrace est = lm.model.unroll(to_partial(test_full[i]), UnrollMode::Inference);
                for (size_t s = 0; s < est.states.size(); ++s)
                    scores.push_back(score_state(to_mask(test_full[i].states[s], dom.num_props()),
                                                 est.states[s]));
            }
            PrMean pr = aggregate(scores);
            cell.precision = pr.precision;
            cell.recall = pr.recall;
            cell.states_scored = scores.size();
            cell.instances_planned = results.size();
            cell.instances_solved = instances_solved(dom, test_insts, results);
            std::vector<std::vector<ActionId>> oracle;
            oracle.reserve(test_full.size());
            for (const PlanTrace& t : test_full) oracle.push_back(t.actions);
            cell.plan_identity_rate = plan_identity_rate(dom, test_insts, results, oracle);
            return 0;
        });

        report.cells.push_back(cell);
    }
    return report;
}

std::string write_report_csv(const ExperimentReport& report) {
    char fp[24];
    std::snprintf(fp, sizeof fp, "%016" PRIx64, report.config_fingerprint);
    std::string out = "# config_fingerprint=";
    out += fp;
    out += '\n';
    out += kCsvHeader;
    out += '\n';
    for (const ExperimentCell& c : report.cells) {
        out += std::to_string(c.observation_pct);
        out += ',';
        out += fmt_double(c.precision);
        out += ',';
        out += fmt_double(c.recall);
        out += ',';
        out += fmt_double(c.instances_solved);
        out += ',';
        out += fmt_double(c.plan_identity_rate);
        out += ',';
        out += fmt_double(c.train_loss_final);
        out += ',';
        out += report.seeds;
        out += '\n';
    }
    return out;
}

ExperimentReport read_report_csv(const std::string& text) {
    ExperimentReport report;
    size_t pos = 0;
    auto next_line = [&]() -> std::optional<std::string> {
        if (pos >= text.size()) return std::nullopt;
        size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        std::string line = text.substr(pos, end - pos);
        pos = end + 1;
        return line;
    };

    std::optional<std::string> line = next_line();
    const std::string fp_prefix = "# config_fingerprint=";
    if (!line || line->rfind(fp_prefix, 0) != 0)
        throw std::runtime_error("report: missing fingerprint line");
    report.config_fingerprint = std::strtoull(line->c_str() + fp_prefix.size(), nullptr, 16);

    line = next_line();
    if (!line || *line != kCsvHeader) throw std::runtime_error("report: bad header");

    while ((line = next_line())) {
        if (line->empty()) continue;
        std::vector<std::string> fields;
        size_t start = 0;
        for (;;) {
            size_t comma = line->find(',', start);
            if (comma == std::string::npos) {
                fields.push_back(line->substr(start));
                break;
            }
            fields.push_back(line->substr(start, comma - start));
            start = comma + 1;
        }
        if (fields.size() != 7) throw std::runtime_error("report: bad row: " + *line);
        ExperimentCell c;
        c.observation_pct = std::atoi(fields[0].c_str());
        c.precision = std::strtod(fields[1].c_str(), nullptr);
        c.recall = std::strtod(fields[2].c_str(), nullptr);
        c.instances_solved = std::strtod(fields[3].c_str(), nullptr);
        c.plan_identity_rate = std::strtod(fields[4].c_str(), nullptr);
        c.train_loss_final = std::strtod(fields[5].c_str(), nullptr);
        report.cells.push_back(c);
        report.seeds = fields[6];
    }
    return report;
}

std::string report_markdown(const ExperimentReport& report) {
    char buf[160];
    std::string out =
        "| observation % | precision | recall | solved | identical plans | final loss |\n"
        "|---:|---:|---:|---:|---:|---:|\n";
    for (const ExperimentCell& c : report.cells) {
        std::snprintf(buf, sizeof buf, "| %d | %.4f | %.4f | %.4f | %.4f | %.3e |\n",
                      c.observation_pct, c.precision, c.recall, c.instances_solved,
                      c.plan_identity_rate, c.train_loss_final);
        out += buf;
    }
    std::snprintf(buf, sizeof buf, "\nseeds: %s; config %016" PRIx64 "\n", report.seeds.c_str(),
                  report.config_fingerprint);
    out += buf;
    return out;
}

}  // namespace vecplan
