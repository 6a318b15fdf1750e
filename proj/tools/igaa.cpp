// Command-line front end: curriculum runs, checkpoint inference, metric
// exports, scenario validation, and synthetic replay generation.

#include <algorithm>
#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "igaa/gir.hpp"
#include "igaa/orchestrator.hpp"
#include "igaa/scenario.hpp"

namespace {

using nlohmann::json;

json load_json(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    json j;
    f >> j;
    return j;
}

void save_text(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << content;
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(3);
    os << std::fixed << v;
    return os.str();
}

int cmd_run(const std::string& config_path, const json& overrides) {
    json doc = json::object();
    if (!config_path.empty()) doc = load_json(config_path);
    for (const auto& [key, value] : overrides.items()) {
        if (key == "endpoint" && doc.contains("endpoint") && doc["endpoint"].is_object()) {
            for (const auto& [k, v] : value.items()) doc["endpoint"][k] = v;
        } else {
            doc[key] = value;
        }
    }
    const igaa::RunConfig cfg = igaa::run_config_from_json(doc);

    const igaa::CurriculumReport report = igaa::run_curriculum(cfg);
    for (const igaa::StepReport& s : report.steps) {
        if (s.aborted) {
            std::cout << s.scenario_name << " ABORTED: " << s.error << "\n";
            continue;
        }
        const double min_sat =
            s.final_sat.empty() ? 0.0
                                : *std::min_element(s.final_sat.begin(), s.final_sat.end());
        std::cout << s.scenario_name << " [" << s.method << "]"
                  << " episodes=" << s.trace.episodes_run
                  << " converged=" << (s.trace.converged ? "yes" : "no")
                  << " min-sat=" << fmt(min_sat) << " reward=" << fmt(s.final_reward)
                  << " retention=" << fmt(s.founding_isr);
        if (!s.directives.empty()) {
            std::cout << " directives=";
            for (std::size_t i = 0; i < s.directives.size(); ++i)
                std::cout << (i ? "," : "") << igaa::to_string(s.directives[i].kind);
        }
        std::cout << "\n";
    }
    for (const std::string& e : report.events) std::cout << "note: " << e << "\n";
    if (!cfg.out_dir.empty()) std::cout << "artifacts written to " << cfg.out_dir << "\n";
    if (!report.completed) {
        std::cerr << "curriculum run did not complete\n";
        return 2;
    }
    return 0;
}

int cmd_infer(const std::string& checkpoint_path, const std::string& intents_path,
              const std::string& out_path) {
    const json checkpoint = load_json(checkpoint_path);
    const json intents = load_json(intents_path);
    const auto decisions = igaa::infer(checkpoint, intents);
    json out = json::array();
    for (const auto& d : decisions) out.push_back(igaa::to_json(d));
    const std::string text = out.dump(2) + "\n";
    if (out_path.empty())
        std::cout << text;
    else
        save_text(out_path, text);
    return 0;
}

int cmd_validate(const std::string& scenario_path) {
    const igaa::ScenarioSpec spec = igaa::scenario_from_json(load_json(scenario_path));
    const igaa::ScenarioValidation v = igaa::validate_scenario(spec);
    if (v.clean()) {
        std::cout << spec.name << ": valid\n";
        return 0;
    }
    std::cerr << spec.name << ": " << v.violations.size() << " violation(s)\n";
    for (const std::string& s : v.violations) std::cerr << "- " << s << "\n";
    return 1;
}

int cmd_gen_replay(const std::string& model_path, std::size_t count, const std::string& tag,
                   std::uint64_t seed, const std::string& out_path) {
    const json doc = load_json(model_path);
    const igaa::CvaeModel model = igaa::cvae_from_json(doc.at("cvae"));
    const auto service_tags = doc.at("service_tags").get<std::vector<std::string>>();
    const auto records = igaa::synthesize_replay(model, count, service_tags, tag, seed);
    json out = json::array();
    for (const auto& r : records) out.push_back(igaa::to_json(r));
    const std::string text = out.dump(2) + "\n";
    if (out_path.empty())
        std::cout << text;
    else
        save_text(out_path, text);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"edge service-scheduling curriculum trainer"};
    app.require_subcommand(1);

    // run-curriculum ---------------------------------------------------------
    auto* run = app.add_subcommand("run-curriculum", "train across generated scenarios");
    std::string run_config;
    run->add_option("--config", run_config, "JSON run configuration file");
    json overrides = json::object();
    std::uint64_t seed = 0;
    auto* seed_opt = run->add_option("--seed", seed, "master seed");
    std::size_t steps = 0;
    auto* steps_opt = run->add_option("--steps", steps, "scenario emissions to train on");
    std::string out_dir;
    auto* out_opt = run->add_option("--out", out_dir, "artifact directory");
    bool gir_on = false, gir_off = false;
    auto* gir_on_flag = run->add_flag("--replay", gir_on, "enable generative intent replay");
    auto* gir_off_flag = run->add_flag("--no-replay", gir_off, "disable generative intent replay");
    bool external = false;
    auto* ext_flag = run->add_flag("--external", external, "use the external scenario endpoint");
    std::string endpoint_url;
    auto* url_opt = run->add_option("--endpoint-url", endpoint_url, "completion endpoint URL");
    bool keep_going = false;
    auto* keep_flag = run->add_flag("--continue-on-error", keep_going,
                                    "record failed steps and keep training");
    double fault_bias = 0.0;
    auto* fault_opt = run->add_option("--fault-cpu-bias", fault_bias,
                                      "reward bonus for offload-free nodes (fault injection)");
    std::size_t episode_cap = 0;
    auto* cap_opt = run->add_option("--episode-cap", episode_cap, "episode cap per step");

    // infer ------------------------------------------------------------------
    auto* inf = app.add_subcommand("infer", "schedule intents with a trained checkpoint");
    std::string checkpoint_path, intents_path, infer_out;
    inf->add_option("--checkpoint", checkpoint_path, "checkpoint JSON file")->required();
    inf->add_option("--intents", intents_path, "intents JSON file")->required();
    inf->add_option("--out", infer_out, "write decisions here instead of stdout");

    // export-metrics ----------------------------------------------------------
    auto* exp = app.add_subcommand("export-metrics", "rebuild exports from a run report");
    std::string run_dir, format = "both";
    exp->add_option("--run-dir", run_dir, "directory holding report.json")->required();
    exp->add_option("--format", format, "csv, json, or both");

    // validate-scenario --------------------------------------------------------
    auto* val = app.add_subcommand("validate-scenario", "check a scenario document");
    std::string scenario_path;
    val->add_option("--scenario", scenario_path, "scenario JSON file")->required();

    // gen-replay ---------------------------------------------------------------
    auto* gen = app.add_subcommand("gen-replay", "sample synthetic intents from a replay model");
    std::string model_path, tag_filter, gen_out;
    std::size_t count = 16;
    std::uint64_t gen_seed = 1;
    gen->add_option("--model", model_path, "replay-model JSON file")->required();
    gen->add_option("--count", count, "records to draw");
    gen->add_option("--tag", tag_filter, "only emit records carrying this scenario tag");
    gen->add_option("--seed", gen_seed, "sampling seed");
    gen->add_option("--out", gen_out, "write records here instead of stdout");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            if (*seed_opt) overrides["seed"] = seed;
            if (*steps_opt) overrides["steps"] = steps;
            if (*out_opt) overrides["out_dir"] = out_dir;
            if (*gir_on_flag) overrides["gir_enabled"] = true;
            if (*gir_off_flag) overrides["gir_enabled"] = false;
            if (*ext_flag) overrides["use_external_generator"] = true;
            if (*url_opt) overrides["endpoint"] = json{{"url", endpoint_url}};
            if (*keep_flag) overrides["continue_on_error"] = true;
            if (*fault_opt) overrides["fault_cpu_bias"] = fault_bias;
            if (*cap_opt) overrides["episode_cap"] = episode_cap;
            return cmd_run(run_config, overrides);
        }
        if (inf->parsed()) return cmd_infer(checkpoint_path, intents_path, infer_out);
        if (exp->parsed()) {
            igaa::export_metrics(run_dir, format);
            return 0;
        }
        if (val->parsed()) return cmd_validate(scenario_path);
        if (gen->parsed()) return cmd_gen_replay(model_path, count, tag_filter, gen_seed, gen_out);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
