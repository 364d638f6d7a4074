#include "docaug/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "docaug/strings.hpp"

using nlohmann::json;

namespace docaug::metrics {

namespace {

bool is_punct_char(unsigned char c) {
    static const char* kPunct = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~";
    return std::strchr(kPunct, static_cast<char>(c)) != nullptr && c != '\0';
}

double f1_of(double p, double r) {
    return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

using Key = std::tuple<std::string, std::string, std::string>;

std::set<Key> tuple_set(const std::vector<PredictionTuple>& tuples) {
    std::set<Key> out;
    for (const auto& t : tuples) {
        out.emplace(t.doc_id, t.role, normalize(t.argument));
    }
    return out;
}

}  // namespace

std::string normalize(const std::string& argument) {
    std::string depunct;
    depunct.reserve(argument.size());
    for (unsigned char c : argument) {
        if (is_punct_char(c)) continue;
        depunct.push_back(static_cast<char>(std::tolower(c)));
    }
    std::vector<std::string> kept;
    std::string tok;
    auto flush = [&] {
        if (tok.empty()) return;
        if (tok != "a" && tok != "an" && tok != "the") kept.push_back(tok);
        tok.clear();
    };
    for (unsigned char c : depunct) {
        if (std::isspace(c)) {
            flush();
        } else {
            tok.push_back(static_cast<char>(c));
        }
    }
    flush();
    return strings::join(kept, " ");
}

ScoreTriple exact_match(const std::vector<PredictionTuple>& pred,
                        const std::vector<PredictionTuple>& gold) {
    auto p = tuple_set(pred);
    auto g = tuple_set(gold);
    std::size_t inter = 0;
    for (const auto& t : p) {
        if (g.count(t)) ++inter;
    }
    ScoreTriple st;
    st.precision = p.empty() ? 0.0 : static_cast<double>(inter) / static_cast<double>(p.size());
    st.recall = g.empty() ? 0.0 : static_cast<double>(inter) / static_cast<double>(g.size());
    st.f1 = f1_of(st.precision, st.recall);
    return st;
}

namespace {

std::vector<PredictionTuple> filter_role(const std::vector<PredictionTuple>& tuples,
                                         const std::string& role) {
    std::vector<PredictionTuple> out;
    for (const auto& t : tuples) {
        if (t.role == role) out.push_back(t);
    }
    return out;
}

}  // namespace

std::pair<double, std::map<std::string, ScoreTriple>> role_f1(
    const std::vector<PredictionTuple>& pred, const std::vector<PredictionTuple>& gold,
    const std::set<std::string>& role_universe, AbsentRolePolicy policy) {
    if (role_universe.empty()) throw EmptyRoleUniverse("role universe is empty");
    std::map<std::string, ScoreTriple> per_role;
    double sum = 0.0;
    std::size_t counted = 0;
    for (const auto& role : role_universe) {
        auto p = filter_role(pred, role);
        auto g = filter_role(gold, role);
        if (p.empty() && g.empty() && policy == AbsentRolePolicy::exclude) continue;
        ScoreTriple st = exact_match(p, g);
        per_role[role] = st;
        sum += st.f1;
        ++counted;
    }
    double macro = counted == 0 ? 0.0 : sum / static_cast<double>(counted);
    return {macro, std::move(per_role)};
}

std::optional<double> zero_shot_f1(const std::vector<PredictionTuple>& pred,
                                   const std::vector<PredictionTuple>& gold,
                                   const std::set<std::string>& zero_roles,
                                   AbsentRolePolicy policy) {
    if (zero_roles.empty()) return std::nullopt;
    return role_f1(pred, gold, zero_roles, policy).first;
}

std::optional<double> rdf1(const std::vector<PredictionTuple>& pred,
                           const std::vector<PredictionTuple>& gold,
                           const std::set<std::string>& outlier_roles,
                           AbsentRolePolicy policy) {
    if (outlier_roles.empty()) return std::nullopt;
    return role_f1(pred, gold, outlier_roles, policy).first;
}

WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw LengthMismatch("paired samples differ in length");
    if (x.empty()) throw LengthMismatch("empty samples");

    std::vector<double> diffs;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double d = x[i] - y[i];
        if (d != 0.0) diffs.push_back(d);
    }
    WilcoxonResult res;
    res.n = diffs.size();
    if (diffs.empty()) {
        res.statistic = 0.0;
        res.p_value = 1.0;  // all differences zero
        return res;
    }

    const std::size_t n = diffs.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::fabs(diffs[a]) < std::fabs(diffs[b]);
    });

    // average ranks within groups of tied |d|
    std::vector<double> rank(n, 0.0);
    double tie_correction = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && std::fabs(diffs[order[j]]) == std::fabs(diffs[order[i]])) ++j;
        double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k) rank[order[k]] = avg;
        double t = static_cast<double>(j - i);
        tie_correction += t * t * t - t;
        i = j;
    }

    double w_plus = 0.0;
    double total = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        total += rank[k];
        if (diffs[k] > 0.0) w_plus += rank[k];
    }
    double w_minus = total - w_plus;
    double w = std::min(w_plus, w_minus);
    res.statistic = w;

    if (n <= 12) {
        // exact: enumerate all sign assignments over the observed ranks
        const std::size_t combos = std::size_t{1} << n;
        std::size_t at_most = 0;
        for (std::size_t mask = 0; mask < combos; ++mask) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                if (mask & (std::size_t{1} << k)) s += rank[k];
            }
            if (s <= w + 1e-9) ++at_most;
        }
        res.p_value = std::min(1.0, 2.0 * static_cast<double>(at_most) /
                                        static_cast<double>(combos));
    } else {
        double dn = static_cast<double>(n);
        double mu = dn * (dn + 1.0) / 4.0;
        double var = dn * (dn + 1.0) * (2.0 * dn + 1.0) / 24.0 - tie_correction / 48.0;
        double z = (w - mu) / std::sqrt(var);
        double phi = 0.5 * std::erfc(-z / std::sqrt(2.0));
        res.p_value = std::min(1.0, 2.0 * phi);
    }
    return res;
}

MetricReport evaluate(const std::vector<PredictionTuple>& pred,
                      const std::vector<PredictionTuple>& gold,
                      const std::set<std::string>& role_universe,
                      const std::optional<std::set<std::string>>& zero_roles,
                      const std::optional<std::set<std::string>>& outlier_roles,
                      AbsentRolePolicy policy) {
    MetricReport report;
    report.overall = exact_match(pred, gold);
    auto [macro, per_role] = role_f1(pred, gold, role_universe, policy);
    report.role_f1 = macro;
    report.per_role = std::move(per_role);
    if (zero_roles) report.zero_shot_f1 = zero_shot_f1(pred, gold, *zero_roles, policy);
    if (outlier_roles) report.rdf1 = rdf1(pred, gold, *outlier_roles, policy);
    return report;
}

std::vector<PredictionTuple> load_tuples(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open tuple file: " + path);
    std::vector<PredictionTuple> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (strings::trim(line).empty()) continue;
        json obj = json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object()) {
            throw Error(path + ": malformed JSON on line " + std::to_string(line_no));
        }
        out.push_back({obj.at("doc_id").get<std::string>(), obj.at("role").get<std::string>(),
                       obj.at("argument").get<std::string>()});
    }
    return out;
}

namespace {

json triple_to_json(const ScoreTriple& st) {
    return json{{"precision", st.precision}, {"recall", st.recall}, {"f1", st.f1}};
}

}  // namespace

std::string report_to_json(const MetricReport& report) {
    json obj;
    obj["overall"] = triple_to_json(report.overall);
    obj["role_f1"] = report.role_f1;
    obj["zero_shot_f1"] = report.zero_shot_f1 ? json(*report.zero_shot_f1) : json(nullptr);
    obj["rdf1"] = report.rdf1 ? json(*report.rdf1) : json(nullptr);
    json per;
    for (const auto& [role, st] : report.per_role) per[role] = triple_to_json(st);
    obj["per_role"] = std::move(per);
    return obj.dump(2);
}

std::string report_to_table(const MetricReport& report) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4);
    std::size_t width = 12;
    for (const auto& [role, st] : report.per_role) width = std::max(width, role.size());
    auto row = [&](const std::string& name, const ScoreTriple& st) {
        os << std::left << std::setw(static_cast<int>(width + 2)) << name << std::right
           << std::setw(8) << st.precision << std::setw(8) << st.recall << std::setw(8) << st.f1
           << "\n";
    };
    os << std::left << std::setw(static_cast<int>(width + 2)) << "role" << std::right
       << std::setw(8) << "P" << std::setw(8) << "R" << std::setw(8) << "F1" << "\n";
    for (const auto& [role, st] : report.per_role) row(role, st);
    row("<overall>", report.overall);
    os << "role_f1      " << report.role_f1 << "\n";
    os << "zero_shot_f1 " << (report.zero_shot_f1 ? std::to_string(*report.zero_shot_f1) : "N/A")
       << "\n";
    os << "rdf1         " << (report.rdf1 ? std::to_string(*report.rdf1) : "N/A") << "\n";
    return os.str();
}

}  // namespace docaug::metrics
