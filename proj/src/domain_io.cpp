#include "vecplan/domain_io.hpp"

#include <fstream>
#include <sstream>

namespace vecplan {

namespace {

std::vector<std::string> tokens_of(const std::string& line) {
    std::vector<std::string> toks;
    std::istringstream ss(line);
    std::string t;
    while (ss >> t) toks.push_back(t);
    return toks;
}

// Reads lines, strips comments ('#' to end of line), skips blanks, and keeps
// the source line number for error messages.
class LineReader {
public:
    explicit LineReader(std::istream& in) : in_(in) {}

    bool next(std::vector<std::string>& toks, size_t& line_no) {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_;
            size_t hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            toks = tokens_of(line);
            if (!toks.empty()) {
                line_no = line_;
                return true;
            }
        }
        return false;
    }

    size_t line() const { return line_; }

private:
    std::istream& in_;
    size_t line_ = 0;
};

PropSet parse_props(const std::vector<std::string>& toks, size_t first, const GroundDomain& dom,
                    size_t line_no) {
    std::vector<PropId> ids;
    for (size_t i = first; i < toks.size(); ++i) {
        auto id = dom.find_prop(toks[i]);
        if (!id) throw ParseError("unknown proposition '" + toks[i] + "'", line_no);
        ids.push_back(*id);
    }
    return PropSet(std::move(ids));
}

void write_prop_names(std::ostream& out, const GroundDomain& dom, const PropSet& s) {
    for (PropId p : s) out << ' ' << dom.prop(p).name;
}

}  // namespace

GroundDomain read_domain(std::istream& in) {
    LineReader rd(in);
    std::vector<std::string> toks;
    size_t ln = 0;

    if (!rd.next(toks, ln) || toks[0] != "domain" || toks.size() != 2)
        throw ParseError("expected 'domain NAME' header", ln ? ln : 1);
    std::string name = toks[1];

    std::vector<Proposition> props;
    std::vector<GroundAction> actions;
    std::unordered_map<std::string, PropId> prop_ids;

    bool in_action = false;
    GroundAction cur;
    bool saw_pre = false, saw_add = false, saw_del = false;

    auto lookup = [&](const std::string& tok, size_t line_no) {
        auto it = prop_ids.find(tok);
        if (it == prop_ids.end()) throw ParseError("unknown proposition '" + tok + "'", line_no);
        return it->second;
    };
    auto parse_set = [&](const std::vector<std::string>& t, size_t line_no) {
        std::vector<PropId> ids;
        for (size_t i = 1; i < t.size(); ++i) ids.push_back(lookup(t[i], line_no));
        return PropSet(std::move(ids));
    };

    while (rd.next(toks, ln)) {
        const std::string& kw = toks[0];
        if (kw == "prop") {
            if (in_action) throw ParseError("'prop' inside action block", ln);
            if (toks.size() != 2) throw ParseError("'prop' takes exactly one name", ln);
            if (prop_ids.count(toks[1]))
                throw ParseError("duplicate proposition '" + toks[1] + "'", ln);
            PropId id = static_cast<PropId>(props.size());
            props.push_back({id, toks[1]});
            prop_ids.emplace(toks[1], id);
        } else if (kw == "action") {
            if (in_action) throw ParseError("nested 'action' (missing 'end'?)", ln);
            if (toks.size() != 2) throw ParseError("'action' takes exactly one name", ln);
            in_action = true;
            cur = GroundAction{};
            cur.id = static_cast<ActionId>(actions.size());
            cur.name = toks[1];
            saw_pre = saw_add = saw_del = false;
        } else if (kw == "pre" || kw == "add" || kw == "del") {
            if (!in_action) throw ParseError("'" + kw + "' outside action block", ln);
            bool& seen = kw == "pre" ? saw_pre : (kw == "add" ? saw_add : saw_del);
            if (seen) throw ParseError("duplicate '" + kw + "' in action " + cur.name, ln);
            seen = true;
            PropSet s = parse_set(toks, ln);
            if (kw == "pre")
                cur.precondition = std::move(s);
            else if (kw == "add")
                cur.add_effects = std::move(s);
            else
                cur.del_effects = std::move(s);
        } else if (kw == "end") {
            if (!in_action) throw ParseError("'end' outside action block", ln);
            actions.push_back(std::move(cur));
            in_action = false;
        } else {
            throw ParseError("unexpected keyword '" + kw + "'", ln);
        }
    }
    if (in_action) throw ParseError("unterminated action block (missing 'end')", rd.line());

    try {
        return GroundDomain(std::move(name), std::move(props), std::move(actions));
    } catch (const DomainError& e) {
        throw ParseError(e.what(), rd.line());
    }
}

GroundDomain read_domain_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open domain file: " + path);
    return read_domain(in);
}

void write_domain(std::ostream& out, const GroundDomain& dom) {
    out << "domain " << dom.name() << "\n";
    for (const Proposition& p : dom.propositions()) out << "prop " << p.name << "\n";
    for (const GroundAction& a : dom.actions()) {
        out << "action " << a.name << "\n";
        out << "pre";
        write_prop_names(out, dom, a.precondition);
        out << "\nadd";
        write_prop_names(out, dom, a.add_effects);
        out << "\ndel";
        write_prop_names(out, dom, a.del_effects);
        out << "\nend\n";
    }
}

void write_domain_file(const std::string& path, const GroundDomain& dom) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write domain file: " + path);
    write_domain(out, dom);
}

std::vector<InstanceRecord> read_instances(std::istream& in, const GroundDomain& dom) {
    LineReader rd(in);
    std::vector<std::string> toks;
    size_t ln = 0;
    std::vector<InstanceRecord> out;

    bool open = false;
    InstanceRecord cur;
    bool saw_init = false, saw_goal = false, saw_gs = false;

    while (rd.next(toks, ln)) {
        const std::string& kw = toks[0];
        if (kw == "instance") {
            if (open) throw ParseError("nested 'instance' (missing 'end'?)", ln);
            open = true;
            cur = InstanceRecord{};
            saw_init = saw_goal = saw_gs = false;
        } else if (kw == "init" || kw == "goal" || kw == "goal-state") {
            if (!open) throw ParseError("'" + kw + "' outside instance block", ln);
            bool& seen = kw == "init" ? saw_init : (kw == "goal" ? saw_goal : saw_gs);
            if (seen) throw ParseError("duplicate '" + kw + "' in instance", ln);
            seen = true;
            PropSet s = parse_props(toks, 1, dom, ln);
            if (kw == "init")
                cur.instance.initial = std::move(s);
            else if (kw == "goal")
                cur.instance.goal = std::move(s);
            else
                cur.goal_state = std::move(s);
        } else if (kw == "end") {
            if (!open) throw ParseError("'end' outside instance block", ln);
            if (!saw_init) throw ParseError("instance missing 'init'", ln);
            if (!saw_goal || cur.instance.goal.empty())
                throw ParseError("instance missing nonempty 'goal'", ln);
            if (cur.goal_state && !cur.instance.goal.subset_of(*cur.goal_state))
                throw ParseError("goal-state does not satisfy the goal", ln);
            out.push_back(std::move(cur));
            open = false;
        } else {
            throw ParseError("unexpected keyword '" + kw + "'", ln);
        }
    }
    if (open) throw ParseError("unterminated instance block (missing 'end')", rd.line());
    return out;
}

std::vector<InstanceRecord> read_instances_file(const std::string& path, const GroundDomain& dom) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open instance file: " + path);
    return read_instances(in, dom);
}

void write_instances(std::ostream& out, const GroundDomain& dom,
                     const std::vector<InstanceRecord>& instances) {
    for (const InstanceRecord& r : instances) {
        out << "instance\ninit";
        write_prop_names(out, dom, r.instance.initial);
        out << "\ngoal";
        write_prop_names(out, dom, r.instance.goal);
        out << "\n";
        if (r.goal_state) {
            out << "goal-state";
            write_prop_names(out, dom, *r.goal_state);
            out << "\n";
        }
        out << "end\n";
    }
}

void write_instances_file(const std::string& path, const GroundDomain& dom,
                          const std::vector<InstanceRecord>& instances) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write instance file: " + path);
    write_instances(out, dom, instances);
}

}  // namespace vecplan
