#include <fstream>

#include <nlohmann/json.hpp>

#include "kinvar/inference.hpp"

namespace kinvar::infer {

using nlohmann::json;

// defined in elbo.cpp
json fit_config_to_json(const FitConfig& c);
FitConfig fit_config_from_json_obj(const json& j);

namespace {

json adam_to_json(const opt::AdamState& s) {
    return json{{"m", s.m}, {"v", s.v}, {"t", s.t}};
}

opt::AdamState adam_from_json(const json& j) {
    opt::AdamState s;
    s.m = j.at("m").get<std::vector<double>>();
    s.v = j.at("v").get<std::vector<double>>();
    s.t = j.at("t").get<std::int64_t>();
    return s;
}

} // namespace

void save_checkpoint(const Checkpoint& c, const std::string& path) {
    json j;
    j["format"] = "kinvar checkpoint v1";
    j["step"] = c.step;
    j["recoveries"] = c.recoveries;
    j["config"] = fit_config_to_json(c.config);
    j["model"] = json::parse(kin::model_to_json_text(c.model));
    j["rig"] = json::parse(cam::rig_to_json_text(c.rig));
    json trials = json::array();
    for (const auto& t : c.trials)
        trials.push_back(json{{"name", t.name},
                              {"fps", t.fps},
                              {"frames", t.frames},
                              {"cams", t.cams},
                              {"sites", t.sites}});
    j["trials"] = trials;
    json groups = json::array();
    for (const auto& g : c.params.groups()) {
        auto sp = c.params.span(g.name);
        groups.push_back(json{{"name", g.name},
                              {"values", std::vector<double>(sp.begin(), sp.end())}});
    }
    j["params"] = groups;
    j["opt"] = json{{"main", adam_to_json(c.opt.main)},
                    {"delta", adam_to_json(c.opt.delta)},
                    {"psi", adam_to_json(c.opt.psi)}};

    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write checkpoint '" + path + "'");
    out << j.dump(2) << "\n";
    if (!out) throw Error("write failed for checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read checkpoint '" + path + "'");
    json j;
    try {
        in >> j;
        if (j.at("format").get<std::string>() != "kinvar checkpoint v1")
            throw ParseError("unrecognized checkpoint format");
        Checkpoint c;
        c.step = j.at("step").get<int>();
        c.recoveries = j.at("recoveries").get<int>();
        c.config = fit_config_from_json_obj(j.at("config"));
        c.model = kin::model_from_json_text(j.at("model").dump());
        c.rig = cam::rig_from_json_text(j.at("rig").dump());
        for (const auto& t : j.at("trials")) {
            Checkpoint::TrialMeta m;
            m.name = t.at("name").get<std::string>();
            m.fps = t.at("fps").get<double>();
            m.frames = t.at("frames").get<int>();
            m.cams = t.at("cams").get<int>();
            m.sites = t.at("sites").get<int>();
            c.trials.push_back(m);
        }
        for (const auto& g : j.at("params")) {
            const auto vals = g.at("values").get<std::vector<double>>();
            c.params.add_group(g.at("name").get<std::string>(),
                               std::span<const double>(vals));
        }
        c.opt.main = adam_from_json(j.at("opt").at("main"));
        c.opt.delta = adam_from_json(j.at("opt").at("delta"));
        c.opt.psi = adam_from_json(j.at("opt").at("psi"));
        return c;
    } catch (const json::exception& e) {
        throw ParseError("checkpoint '" + path + "': " + e.what());
    }
}

} // namespace kinvar::infer
