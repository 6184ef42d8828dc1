#include "rubricrl/cli.hpp"

#include "rubricrl/backends.hpp"
#include "rubricrl/error.hpp"
#include "rubricrl/eval_harness.hpp"
#include "rubricrl/io.hpp"
#include "rubricrl/parallel.hpp"
#include "rubricrl/refinement.hpp"
#include "rubricrl/reward_theory.hpp"
#include "rubricrl/tilted_sim.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>

namespace rubricrl {

namespace fs = std::filesystem;

namespace {

struct Options {
    // shared
    std::string out_dir = "out";
    std::size_t jobs = 1;
    std::uint64_t seed = 0;
    std::string backend = "live";
    std::string cache_dir;
    std::string base_url = BackendConfig{}.base_url;
    std::string model = BackendConfig{}.model_name;
    std::string proposer_model;
    std::string verifier_model;
    std::string judge_model;
    std::optional<double> temperature;
    std::string api_key_env = BackendConfig{}.api_key_env;
    int max_retries = BackendConfig{}.max_retries;
    int max_in_flight = BackendConfig{}.max_in_flight;
    int timeout_s = 120;
    std::string transcript;
    double mock_noise = 0.1;

    // theory / sim
    std::vector<std::string> mappings;
    std::optional<double> c;
    std::vector<double> betas;
    std::string output;
    std::uint64_t mc_samples = 1'000'000;
    std::size_t grid_atoms = 10'000;
    double perturb_kl = 0.0;
    std::string dist;
    double beta = 1.0;

    // corpora
    std::string prompts;
    std::string responses;
    std::string rubrics;
    std::string pairs;
    std::string mock_schedule;
    int rounds = 4;
    int votes = 5;
};

constexpr double kProposerTemperature = 0.7;
constexpr double kDefaultTopWrongC = 0.1;
constexpr double kDefaultWorstWrongC = 0.25;

class Ctx {
public:
    Ctx(const Options& o, std::ostream& out, std::ostream& err) : opt(o), out_(out), err_(err) {}

    const Options& opt;

    void print(const std::string& line) {
        std::lock_guard lock(mutex_);
        out_ << line << '\n';
    }
    void log(const std::string& line) {
        std::lock_guard lock(mutex_);
        err_ << line << '\n';
    }
    fs::path out_path(const std::string& name) const { return fs::path(opt.out_dir) / name; }

private:
    std::ostream& out_;
    std::ostream& err_;
    std::mutex mutex_;
};

using PromptIndex = std::map<std::string, PromptRecord, std::less<>>;
using TextIndex = std::map<std::string, std::string, std::less<>>;

TextIndex prompt_texts(const PromptIndex& prompts) {
    TextIndex out;
    for (const auto& [id, p] : prompts) {
        out.emplace(id, p.prompt);
    }
    return out;
}

PromptIndex load_prompts(const std::string& path) {
    return index_prompts(read_records<PromptRecord>(path, prompt_from_json));
}

std::vector<Rubric> load_rubrics(const std::string& path) {
    return read_records<Rubric>(path, rubric_from_json);
}

struct Roles {
    std::shared_ptr<Gateway> proposer;
    std::shared_ptr<Gateway> verifier;
    std::shared_ptr<Gateway> judge;
};

Roles make_roles(Ctx& ctx) {
    const auto& o = ctx.opt;
    GatewayOptions gopt;
    if (!o.cache_dir.empty()) {
        gopt.cache_dir = o.cache_dir;
        gopt.cache_mode = CacheMode::ReadWrite;
    }
    if (!o.transcript.empty()) {
        gopt.transcript = std::make_shared<TranscriptLog>(o.transcript);
    }

    BackendConfig base;
    base.base_url = o.base_url;
    base.api_key_env = o.api_key_env;
    base.max_retries = o.max_retries;
    base.max_in_flight = o.max_in_flight;
    base.request_timeout = std::chrono::seconds(o.timeout_s);

    std::shared_ptr<ChatBackend> backend;
    if (o.backend == "live") {
        if (!std::getenv(o.api_key_env.c_str())) {
            ctx.log("warning: $" + o.api_key_env + " is not set; requests go out unauthenticated");
        }
        backend = std::make_shared<HttpChatBackend>(base);
    } else if (o.backend == "mock") {
        backend = std::make_shared<SimulatedLlm>(o.seed, o.mock_noise);
    } else {
        if (o.cache_dir.empty()) {
            throw std::invalid_argument("--backend cache needs --cache-dir");
        }
        gopt.cache_mode = CacheMode::ReplayOnly;
    }

    auto role = [&](const std::string& model, double default_temperature) {
        BackendConfig cfg = base;
        cfg.model_name = model.empty() ? o.model : model;
        cfg.temperature = o.temperature.value_or(default_temperature);
        return std::make_shared<Gateway>(cfg, backend, gopt);
    };
    return {role(o.proposer_model, kProposerTemperature), role(o.verifier_model, 0.0),
            role(o.judge_model, 0.0)};
}

// Verifier replaying a verdict table. Entries are keyed by prompt id,
// response id and rubric version; a table without per-vote rows answers
// every vote with vote 0.
VerifierFn schedule_verifier(const std::string& path,
                             const std::vector<ResponseRecord>& responses) {
    using Key = std::tuple<std::string, std::string, int, int>;
    auto table = std::make_shared<std::map<Key, GradeVector>>();
    for (const auto& g : read_records<GradeRecord>(path, grade_from_json)) {
        table->emplace(Key{g.prompt_id, g.response_id, g.grades.rubric_version, g.vote}, g.grades);
    }
    auto ids = std::make_shared<std::map<std::pair<std::string, std::string>, std::string>>();
    for (const auto& r : responses) {
        ids->emplace(std::pair{r.prompt_id, r.text}, r.response_id);
    }
    return [table, ids](const GradeRequest& req) {
        const auto& pid = req.rubric.prompt_id();
        const auto id = ids->find({pid, std::string(req.response)});
        if (id == ids->end()) {
            throw InputError("verdict table has no response for prompt '" + pid + "'");
        }
        auto it = table->find(Key{pid, id->second, req.rubric.version(), req.vote_index});
        if (it == table->end()) {
            it = table->find(Key{pid, id->second, req.rubric.version(), 0});
        }
        if (it == table->end()) {
            throw InputError("verdict table has no entry for " + pid + "/" + id->second +
                             " at rubric version " + std::to_string(req.rubric.version()));
        }
        return it->second;
    };
}

std::vector<MisspecMap> selected_maps(const Options& o) {
    std::vector<std::string> names = o.mappings;
    if (names.empty()) {
        names = {"identity", "reversed", "top-wrong", "worst-wrong"};
    }
    const bool any_param = std::any_of(names.begin(), names.end(), [](const auto& n) {
        return n == "top-wrong" || n == "worst-wrong";
    });
    if (o.c && !any_param) {
        throw std::invalid_argument("--c only applies to top-wrong and worst-wrong");
    }
    std::vector<MisspecMap> maps;
    for (const auto& n : names) {
        std::optional<double> c;
        if (n == "top-wrong") {
            c = o.c.value_or(kDefaultTopWrongC);
        } else if (n == "worst-wrong") {
            c = o.c.value_or(kDefaultWorstWrongC);
        }
        maps.push_back(MisspecMap::from_name(n, c));
    }
    return maps;
}

std::vector<double> default_curve_betas() { return log_beta_grid(5.0, 1e-3, 41); }

int cmd_theory_curve(Ctx& ctx) {
    const auto maps = selected_maps(ctx.opt);
    const auto betas = ctx.opt.betas.empty() ? default_curve_betas() : ctx.opt.betas;
    std::string csv = curve_csv_header();
    for (const auto& m : maps) {
        csv += curve_csv_rows(m, tradeoff_curve(m, betas));
    }
    const fs::path path = ctx.opt.output.empty() ? ctx.out_path("curve.csv") : fs::path(ctx.opt.output);
    write_text_atomic(path, csv);
    ctx.print(path.string());
    return kExitOk;
}

int cmd_theory_validate(Ctx& ctx) {
    const auto& o = ctx.opt;
    const auto maps = selected_maps(o);
    const std::vector<double> betas =
        o.betas.empty() ? std::vector<double>{0.05, 0.1, 0.2, 0.5, 1.0, 5.0} : o.betas;
    const std::vector<double> mc_betas = {0.1, 1.0};
    const auto grid = DiscreteResponseDist::uniform_grid(o.grid_atoms);
    const double n = static_cast<double>(o.grid_atoms);
    const double mc_tol = 2e-3 * std::sqrt(1e6 / static_cast<double>(o.mc_samples));

    struct Row {
        std::string check;
        std::string map;
        double beta;
        double deviation;
        double tolerance;
    };
    std::vector<Row> rows;
    for (const auto& m : maps) {
        for (double b : betas) {
            const auto t = tilt(grid, m, b);
            rows.push_back({"kl_discrete", m.name(), b,
                            std::abs(kl_discrete(t) - (kl_closed_form(b) + o.perturb_kl)), 1e-3});
            rows.push_back({"winrate_discrete", m.name(), b,
                            std::abs(win_rate_discrete(t) - win_rate_quadrature(m, b)), 3.0 / n});
        }
        for (double b : mc_betas) {
            rows.push_back({"winrate_mc", m.name(), b,
                            std::abs(win_rate_quadrature(m, b) -
                                     monte_carlo_win_rate(m, b, o.mc_samples, o.seed)),
                            mc_tol});
        }
    }
    rows.push_back({"winrate_identity_exact", "identity", 1.0,
                    std::abs(win_rate_quadrature(MisspecMap::identity(), 1.0) -
                             1.0 / (std::exp(1.0) - 1.0)),
                    1e-9});

    std::ostringstream table;
    table << std::left << std::setw(24) << "check" << std::setw(18) << "map" << std::setw(10)
          << "beta" << std::setw(14) << "deviation" << std::setw(12) << "tolerance"
          << "status\n";
    int failures = 0;
    for (const auto& r : rows) {
        const bool ok = r.deviation <= r.tolerance;
        failures += !ok;
        table << std::setw(24) << r.check << std::setw(18) << r.map << std::setw(10)
              << format_g12(r.beta) << std::setw(14) << std::setprecision(3) << std::scientific
              << r.deviation << std::setw(12) << r.tolerance << std::defaultfloat
              << (ok ? "ok" : "FAIL") << '\n';
        if (!ok) {
            ctx.log("validation failed: " + r.check + " map=" + r.map +
                    " beta=" + format_g12(r.beta));
        }
    }
    auto text = table.str();
    text.pop_back();
    ctx.print(text);
    return failures == 0 ? kExitOk : kExitFailure;
}

int cmd_sim_tilt(Ctx& ctx) {
    const auto& o = ctx.opt;
    if (o.mappings.size() > 1) {
        throw std::invalid_argument("sim tilt takes a single --mapping");
    }
    Options one = o;
    if (one.mappings.empty()) {
        one.mappings = {"identity"};
    }
    const auto m = selected_maps(one).front();
    const DiscreteResponseDist dist(read_dist_csv(o.dist));
    const auto t = tilt(dist, m, o.beta);
    ordered_json j;
    j["mapping"] = m.name();
    j["param_c"] = m.param_c() ? ordered_json(*m.param_c()) : ordered_json(nullptr);
    j["beta"] = o.beta;
    ordered_json atoms = ordered_json::array();
    for (std::size_t i = 0; i < dist.size(); ++i) {
        atoms.push_back({{"gold_reward", dist.atoms()[i].gold_reward},
                         {"base_prob", dist.atoms()[i].prob},
                         {"tilted_prob", t.tilted_probs()[i]}});
    }
    j["atoms"] = std::move(atoms);
    j["expected_gold_reward"] = expected_gold_reward(t);
    j["win_rate"] = win_rate_discrete(t);
    j["kl"] = kl_discrete(t);
    const fs::path path = o.output.empty() ? ctx.out_path("tilt.json") : fs::path(o.output);
    write_text_atomic(path, j.dump(2) + "\n");
    ctx.print(j.dump(2));
    return kExitOk;
}

// Prompt ids already present in a JSONL output, for resume-by-presence.
std::set<std::string, std::less<>> finished_prompts(const fs::path& path) {
    std::set<std::string, std::less<>> out;
    if (fs::exists(path)) {
        for (const auto& r : load_rubrics(path.string())) {
            out.insert(r.prompt_id());
        }
    }
    return out;
}

int cmd_rubric_init(Ctx& ctx) {
    const auto& o = ctx.opt;
    const auto prompts = read_records<PromptRecord>(o.prompts, prompt_from_json);
    const auto index = index_prompts(prompts);
    (void)index;
    const fs::path path = o.output.empty() ? ctx.out_path("rubrics_init.jsonl") : fs::path(o.output);
    const auto done = finished_prompts(path);

    std::vector<const PromptRecord*> todo;
    for (const auto& p : prompts) {
        if (!done.contains(p.id)) {
            todo.push_back(&p);
        }
    }
    if (!done.empty()) {
        ctx.log("skipping " + std::to_string(done.size()) + " prompt(s) with existing rubrics");
    }
    const auto roles = make_roles(ctx);
    OrderedJsonlWriter writer(path, true);
    std::atomic<int> failed{0};
    parallel_for(todo.size(), o.jobs, [&](std::size_t i) {
        const auto& p = *todo[i];
        try {
            auto res = propose_initial_rubric(p.id, p.prompt, *roles.proposer);
            for (const auto& w : res.warnings) {
                ctx.log("prompt " + p.id + ": " + w);
            }
            writer.put(i, {to_json(res.rubric)});
        } catch (const Error& e) {
            ctx.log("prompt " + p.id + ": " + e.what());
            ++failed;
            writer.put(i, {});
        }
    });
    ctx.print(path.string());
    return failed == 0 ? kExitOk : kExitFailure;
}

int cmd_rubric_refine(Ctx& ctx) {
    const auto& o = ctx.opt;
    const auto prompts = read_records<PromptRecord>(o.prompts, prompt_from_json);
    const auto pindex = index_prompts(prompts);
    const auto responses = index_responses(
        read_records<ResponseRecord>(o.responses, response_from_json), pindex);
    std::map<std::string, Rubric, std::less<>> initial;
    if (!o.rubrics.empty()) {
        initial = index_rubrics(load_rubrics(o.rubrics), &pindex);
    }

    const auto rubric_path = ctx.out_path("rubrics.jsonl");
    const auto trace_path = ctx.out_path("traces.jsonl");
    const auto done = finished_prompts(rubric_path);
    // Drop trace lines of prompts interrupted before their rubric landed.
    if (fs::exists(trace_path)) {
        std::string kept;
        for (const auto& j : read_jsonl(trace_path)) {
            if (done.contains(round_from_json(j).first)) {
                kept += to_jsonl_line(j);
            }
        }
        write_text_atomic(trace_path, kept);
    }
    std::vector<const PromptRecord*> todo;
    for (const auto& p : prompts) {
        if (!done.contains(p.id)) {
            todo.push_back(&p);
        }
    }
    if (!done.empty()) {
        ctx.log("skipping " + std::to_string(done.size()) + " prompt(s) with refined rubrics");
    }

    const auto roles = make_roles(ctx);
    const auto scorer = make_scorer(make_verifier(roles.verifier));
    const auto proposer = make_proposer(roles.proposer);
    OrderedJsonlWriter trace_writer(trace_path, true);
    OrderedJsonlWriter rubric_writer(rubric_path, true);
    std::atomic<int> failed{0};
    parallel_for(todo.size(), o.jobs, [&](std::size_t i) {
        const auto& p = *todo[i];
        try {
            std::vector<Candidate> cands;
            if (const auto it = responses.find(p.id); it != responses.end()) {
                for (const auto& r : it->second) {
                    cands.push_back({r.response_id, r.text, r.source_model});
                }
            }
            const CandidatePool pool(p.id, std::move(cands));
            std::optional<Rubric> start;
            if (const auto it = initial.find(p.id); it != initial.end()) {
                start = it->second;
            } else {
                auto res = propose_initial_rubric(p.id, p.prompt, *roles.proposer);
                for (const auto& w : res.warnings) {
                    ctx.log("prompt " + p.id + ": " + w);
                }
                start = std::move(res.rubric);
            }
            auto res = refine_iterative(p.prompt, pool, *start, o.rounds, scorer, proposer);
            std::vector<ordered_json> lines;
            for (const auto& round : res.trace.rounds) {
                if (!round.ok) {
                    ctx.log("prompt " + p.id + ": round " + std::to_string(round.round_index) +
                            " failed: " + round.error);
                }
                for (const auto& w : round.warnings) {
                    ctx.log("prompt " + p.id + ": " + w);
                }
                lines.push_back(to_json(p.id, round));
            }
            trace_writer.put(i, std::move(lines));
            rubric_writer.put(i, {to_json(res.rubric)});
        } catch (const Error& e) {
            ctx.log("prompt " + p.id + ": " + e.what());
            ++failed;
            trace_writer.put(i, {});
            rubric_writer.put(i, {});
        }
    });
    ctx.print(rubric_path.string());
    ctx.print(trace_path.string());
    return failed == 0 ? kExitOk : kExitFailure;
}

int cmd_rubric_score(Ctx& ctx) {
    const auto& o = ctx.opt;
    const auto pindex = load_prompts(o.prompts);
    const auto response_list = read_records<ResponseRecord>(o.responses, response_from_json);
    (void)index_responses(response_list, pindex);
    const auto rubrics = index_rubrics(load_rubrics(o.rubrics), &pindex);
    std::set<std::string, std::less<>> unrubricked;
    for (const auto& r : response_list) {
        if (!rubrics.contains(r.prompt_id)) {
            unrubricked.insert(r.prompt_id);
        }
    }
    if (!unrubricked.empty()) {
        std::string ids;
        for (const auto& id : unrubricked) {
            ids += ids.empty() ? id : ", " + id;
        }
        throw InputError("no rubric for prompt ids: " + ids);
    }

    if (o.votes < 1 || o.votes % 2 == 0) {
        throw ProtocolError("--votes must be odd and positive, got " + std::to_string(o.votes));
    }
    VerifierFn verifier;
    if (!o.mock_schedule.empty()) {
        verifier = schedule_verifier(o.mock_schedule, response_list);
    } else {
        verifier = make_verifier(make_roles(ctx).verifier);
    }

    const fs::path path = o.output.empty() ? ctx.out_path("grades.jsonl") : fs::path(o.output);
    OrderedJsonlWriter writer(path, false);
    std::vector<std::string> summary(response_list.size());
    std::atomic<int> failed{0};
    parallel_for(response_list.size(), o.jobs, [&](std::size_t i) {
        const auto& r = response_list[i];
        const auto& rubric = rubrics.find(r.prompt_id)->second;
        const auto& prompt = pindex.find(r.prompt_id)->second.prompt;
        try {
            const auto votes = grade_with_votes(prompt, r.text, rubric, verifier, o.votes);
            std::vector<ordered_json> lines;
            std::string line = r.prompt_id + " " + r.response_id;
            for (std::size_t v = 0; v < votes.size(); ++v) {
                const auto score = aggregate_score(rubric, votes[v]);
                lines.push_back(to_json(GradeRecord{r.prompt_id, r.response_id,
                                                    static_cast<int>(v), votes[v], score}));
                line += " " + format_score(score);
            }
            summary[i] = line;
            writer.put(i, std::move(lines));
        } catch (const Error& e) {
            ctx.log("response " + r.prompt_id + "/" + r.response_id + ": " + e.what());
            ++failed;
            writer.put(i, {});
        }
    });
    for (const auto& line : summary) {
        if (!line.empty()) {
            ctx.print(line);
        }
    }
    return failed == 0 ? kExitOk : kExitFailure;
}

int cmd_eval_winrate(Ctx& ctx) {
    const auto& o = ctx.opt;
    const auto pindex = load_prompts(o.prompts);
    const auto pairs = read_records<EvalPair>(o.pairs, eval_pair_from_json);
    const auto roles = make_roles(ctx);
    const auto report = winrate_eval(pairs, prompt_texts(pindex), make_judge(roles.judge), o.seed,
                                     o.jobs);
    std::string lines;
    for (const auto& rec : report.records) {
        lines += to_jsonl_line(to_json(rec));
    }
    write_text_atomic(ctx.out_path("winrate_pairs.jsonl"), lines);
    ordered_json j;
    j["seed"] = o.seed;
    j["n_pairs"] = report.n_pairs;
    j["n_wins"] = report.n_wins;
    j["n_parse_failures"] = report.n_parse_failures;
    j["win_rate"] = report.win_rate;
    write_text_atomic(ctx.out_path("winrate_report.json"), j.dump(2) + "\n");
    ctx.print(j.dump(2));
    return kExitOk;
}

int cmd_eval_accuracy(Ctx& ctx) {
    const auto& o = ctx.opt;
    const auto pindex = load_prompts(o.prompts);
    const auto pairs = read_records<RegionPair>(o.pairs, region_pair_from_json);
    const auto rubrics = index_rubrics(load_rubrics(o.rubrics), &pindex);
    std::set<std::string, std::less<>> dangling;
    for (const auto& p : pairs) {
        if (!pindex.contains(p.prompt_id)) {
            dangling.insert(p.prompt_id);
        }
    }
    if (!dangling.empty()) {
        std::string ids;
        for (const auto& id : dangling) {
            ids += ids.empty() ? id : ", " + id;
        }
        throw InputError("pairs reference unknown prompt ids: " + ids);
    }
    const auto roles = make_roles(ctx);
    const auto result =
        region_accuracy(pairs, prompt_texts(pindex), rubrics, make_verifier(roles.verifier),
                        make_judge(roles.judge), o.votes, o.seed, o.jobs);
    std::string lines;
    for (const auto& rec : result.records) {
        lines += to_jsonl_line(to_json(rec));
    }
    write_text_atomic(ctx.out_path("accuracy_pairs.jsonl"), lines);
    ordered_json j;
    j["seed"] = o.seed;
    j["votes"] = o.votes;
    ordered_json regions = ordered_json::array();
    for (const auto& r : result.reports) {
        regions.push_back(to_json(r));
    }
    j["regions"] = std::move(regions);
    write_text_atomic(ctx.out_path("accuracy_report.json"), j.dump(2) + "\n");
    ctx.print(j.dump(2));
    return kExitOk;
}

// TOML holding the global options and those of the command that ran, with
// defaults filled in; feeding it back through --config repeats the run.
std::string manifest(const CLI::App& app, const CLI::App& group, const CLI::App& cmd) {
    auto emit = [](const CLI::App& a, std::string& out) {
        for (const auto* opt : a.get_options()) {
            const auto name = opt->get_single_name();
            if (opt->get_lnames().empty() || name == "help" || name == "version" ||
                name == "config") {
                continue;
            }
            std::vector<std::string> values = opt->results();
            if (values.empty() && !opt->get_default_str().empty()) {
                values = {opt->get_default_str()};
            }
            if (values.empty()) {
                continue;
            }
            out += name + "=" + CLI::detail::ini_join(values) + "\n";
        }
    };
    std::string out = "# rubricrl " + std::string(RUBRICRL_VERSION) + "\n";
    emit(app, out);
    out += "[" + group.get_name() + "." + cmd.get_name() + "]\n";
    emit(cmd, out);
    return out;
}

void add_corpus_option(CLI::App* cmd, const char* name, std::string& target, const char* what) {
    cmd->add_option(name, target, what)->required()->check(CLI::ExistingFile);
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"Reward misspecification theory and rubric-based reward tooling", "rubricrl"};
    app.set_version_flag("--version", std::string(RUBRICRL_VERSION));
    app.set_config("--config", "", "TOML config file; a run manifest works as one");
    app.require_subcommand(1);
    app.fallthrough();

    app.add_option("--out-dir", o.out_dir, "Directory for outputs and manifests")
        ->capture_default_str();
    app.add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber)
        ->capture_default_str();
    app.add_option("--seed", o.seed, "Seed for flips, Monte Carlo and the mock model")
        ->capture_default_str();
    app.add_option("--backend", o.backend, "Model backend")
        ->check(CLI::IsMember({"live", "mock", "cache"}))
        ->capture_default_str();
    app.add_option("--cache-dir", o.cache_dir, "Response cache directory");
    app.add_option("--base-url", o.base_url, "Chat-completions base URL")->capture_default_str();
    app.add_option("--model", o.model, "Model for every role")->capture_default_str();
    app.add_option("--proposer-model", o.proposer_model, "Override model for the proposer");
    app.add_option("--verifier-model", o.verifier_model, "Override model for the verifier");
    app.add_option("--judge-model", o.judge_model, "Override model for the judge");
    app.add_option("--temperature", o.temperature,
                   "Sampling temperature for every role (default 0.7 proposer, 0 others)")
        ->check(CLI::NonNegativeNumber);
    app.add_option("--api-key-env", o.api_key_env, "Environment variable holding the API key")
        ->capture_default_str();
    app.add_option("--max-retries", o.max_retries, "Retries per model call")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    app.add_option("--max-in-flight", o.max_in_flight, "Concurrent requests per role")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app.add_option("--timeout", o.timeout_s, "Request timeout in seconds")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app.add_option("--transcript", o.transcript, "Append every model exchange to this JSONL file");
    app.add_option("--mock-noise", o.mock_noise, "Verdict flip probability of the mock verifier")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();

    auto* theory = app.add_subcommand("theory", "Closed-form tradeoffs and cross-checks");
    auto* sim = app.add_subcommand("sim", "Discrete tilted-policy simulation");
    auto* rubric = app.add_subcommand("rubric", "Rubric construction, refinement and scoring");
    auto* eval = app.add_subcommand("eval", "Pairwise evaluation");
    for (auto* group : {theory, sim, rubric, eval}) {
        group->require_subcommand(1);
        group->fallthrough();
        group->configurable();
    }

    auto add_map_options = [&](CLI::App* cmd) {
        cmd->add_option("--mapping", o.mappings,
                        "identity, reversed, top-wrong or worst-wrong (repeatable)")
            ->check(CLI::IsMember({"identity", "reversed", "top-wrong", "worst-wrong"}));
        cmd->add_option("--c", o.c, "Misspecified fraction for top-wrong / worst-wrong");
    };

    auto* curve = theory->add_subcommand("curve", "Write KL / win-rate curves as CSV");
    add_map_options(curve);
    curve->add_option("--betas", o.betas, "KL penalties (default: 41 log-spaced from 5 to 1e-3)")
        ->check(CLI::PositiveNumber);
    curve->add_option("--output", o.output, "CSV path (default <out-dir>/curve.csv)");

    auto* validate = theory->add_subcommand("validate", "Cross-check quadrature, Monte Carlo "
                                                        "and the discrete simulator");
    add_map_options(validate);
    validate->add_option("--betas", o.betas, "KL penalties for the discrete checks")
        ->check(CLI::PositiveNumber);
    validate->add_option("--mc-samples", o.mc_samples, "Monte Carlo sample count")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    validate->add_option("--grid-atoms", o.grid_atoms, "Atoms in the discrete grid")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    validate->add_option("--perturb-kl", o.perturb_kl, "Test hook: offset added to the closed "
                                                        "form KL")
        ->capture_default_str();

    auto* tilt_cmd = sim->add_subcommand("tilt", "Tilt a discrete base distribution");
    add_map_options(tilt_cmd);
    tilt_cmd->add_option("--dist", o.dist, "CSV with columns gold_reward,prob")
        ->required()
        ->check(CLI::ExistingFile);
    tilt_cmd->add_option("--beta", o.beta, "KL penalty")->required()->check(CLI::PositiveNumber);
    tilt_cmd->add_option("--output", o.output, "JSON path (default <out-dir>/tilt.json)");

    auto* init = rubric->add_subcommand("init", "Draft an initial rubric per prompt");
    add_corpus_option(init, "--prompts", o.prompts, "Prompts JSONL");
    init->add_option("--output", o.output, "Rubrics JSONL (default <out-dir>/rubrics_init.jsonl)");

    auto* refine = rubric->add_subcommand("refine", "Iterative refinement over candidate pools");
    add_corpus_option(refine, "--prompts", o.prompts, "Prompts JSONL");
    add_corpus_option(refine, "--responses", o.responses, "Candidate responses JSONL");
    refine->add_option("--rubrics", o.rubrics, "Initial rubrics JSONL (drafted when absent)")
        ->check(CLI::ExistingFile);
    refine->add_option("--rounds", o.rounds, "Refinement rounds")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();

    auto* score = rubric->add_subcommand("score", "Grade responses against rubrics");
    add_corpus_option(score, "--prompts", o.prompts, "Prompts JSONL");
    add_corpus_option(score, "--responses", o.responses, "Responses JSONL");
    add_corpus_option(score, "--rubrics", o.rubrics, "Rubrics JSONL");
    score->add_option("--votes", o.votes, "Independent gradings per response (odd)")
        ->capture_default_str();
    score->add_option("--mock-schedule", o.mock_schedule,
                      "Verdict table JSONL to replay instead of calling a verifier")
        ->check(CLI::ExistingFile);
    score->add_option("--output", o.output, "Grades JSONL (default <out-dir>/grades.jsonl)");

    auto* winrate = eval->add_subcommand("winrate", "Position-flipped judge win rate");
    add_corpus_option(winrate, "--prompts", o.prompts, "Prompts JSONL");
    add_corpus_option(winrate, "--pairs", o.pairs, "Policy / reference pairs JSONL");

    auto* accuracy = eval->add_subcommand("accuracy", "Rubric preference accuracy by region");
    add_corpus_option(accuracy, "--prompts", o.prompts, "Prompts JSONL");
    add_corpus_option(accuracy, "--pairs", o.pairs, "Region pairs JSONL");
    add_corpus_option(accuracy, "--rubrics", o.rubrics, "Rubrics JSONL");
    accuracy->add_option("--votes", o.votes, "Independent gradings per response (odd)")
        ->capture_default_str();

    for (auto* group : {theory, sim, rubric, eval}) {
        for (auto* cmd : group->get_subcommands({})) {
            cmd->configurable();
        }
    }

    std::vector<std::string> argv_store;
    argv_store.reserve(args.size() + 1);
    argv_store.emplace_back("rubricrl");
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_store) {
        argv.push_back(a.data());
    }

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    using Handler = int (*)(Ctx&);
    const std::vector<std::tuple<CLI::App*, CLI::App*, Handler>> commands = {
        {theory, curve, cmd_theory_curve},     {theory, validate, cmd_theory_validate},
        {sim, tilt_cmd, cmd_sim_tilt},         {rubric, init, cmd_rubric_init},
        {rubric, refine, cmd_rubric_refine},   {rubric, score, cmd_rubric_score},
        {eval, winrate, cmd_eval_winrate},     {eval, accuracy, cmd_eval_accuracy},
    };

    Ctx ctx(o, out, err);
    try {
        for (const auto& [group, cmd, handler] : commands) {
            if (cmd->parsed()) {
                write_text_atomic(ctx.out_path("manifest-" + group->get_name() + "-" +
                                               cmd->get_name() + ".toml"),
                                  manifest(app, *group, *cmd));
                return handler(ctx);
            }
        }
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const DomainError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const UnsupportedMapError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ProtocolError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    err << "error: no command given\n";
    return kExitUsage;
}

} // namespace rubricrl
