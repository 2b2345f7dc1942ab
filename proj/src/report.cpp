#include "distreal/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include <json.hpp>

namespace distreal {

namespace {

std::pair<double, double> mean_std(const std::vector<double>& v) {
    if (v.empty()) return {0.0, 0.0};
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= static_cast<double>(v.size());
    return {mean, std::sqrt(var)};
}

}  // namespace

std::vector<TechniqueSummary> summarize(const std::vector<RunResult>& results, int at_round) {
    std::vector<std::string> order;
    std::map<std::string, std::vector<const RunResult*>> by_tech;
    for (const auto& r : results) {
        const std::string name = technique_name(r.technique);
        if (!by_tech.count(name)) order.push_back(name);
        by_tech[name].push_back(&r);
    }

    std::vector<TechniqueSummary> rows;
    for (const auto& name : order) {
        TechniqueSummary row;
        row.technique = name;
        row.at_round = at_round;
        std::vector<double> finals, ats;
        for (const auto* r : by_tech[name]) {
            if (r->rounds.empty()) continue;
            finals.push_back(r->rounds.back().accuracy);
            if (at_round >= 0) {
                auto it = std::find_if(r->rounds.begin(), r->rounds.end(),
                                       [at_round](const RoundRecord& rec) {
                                           return rec.round == at_round;
                                       });
                if (it == r->rounds.end())
                    ++row.missing_at;
                else
                    ats.push_back(it->accuracy);
            }
        }
        row.runs = static_cast<int>(finals.size());
        std::tie(row.mean_final, row.std_final) = mean_std(finals);
        if (at_round >= 0) std::tie(row.mean_at, row.std_at) = mean_std(ats);
        rows.push_back(row);
    }
    return rows;
}

std::string summary_to_json(const std::vector<TechniqueSummary>& rows) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : rows) {
        nlohmann::json e{{"technique", r.technique},
                         {"runs", r.runs},
                         {"mean_final_accuracy", r.mean_final},
                         {"std_final_accuracy", r.std_final}};
        if (r.at_round >= 0) {
            e["at_round"] = r.at_round;
            e["mean_accuracy_at_round"] = r.mean_at;
            e["std_accuracy_at_round"] = r.std_at;
            e["runs_missing_round"] = r.missing_at;
        }
        j.push_back(e);
    }
    return j.dump(2) + "\n";
}

std::string summary_to_text(const std::vector<TechniqueSummary>& rows) {
    std::ostringstream os;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-20s %5s %18s", "technique", "runs", "final acc");
    os << buf;
    if (!rows.empty() && rows[0].at_round >= 0) {
        std::snprintf(buf, sizeof buf, " %18s", ("acc@" + std::to_string(rows[0].at_round)).c_str());
        os << buf;
    }
    os << "\n";
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%-20s %5d    %6.4f +- %6.4f", r.technique.c_str(),
                      r.runs, r.mean_final, r.std_final);
        os << buf;
        if (r.at_round >= 0) {
            std::snprintf(buf, sizeof buf, "    %6.4f +- %6.4f", r.mean_at, r.std_at);
            os << buf;
        }
        os << "\n";
    }
    return os.str();
}

}  // namespace distreal
