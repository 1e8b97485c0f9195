#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "keygaze/amortizer/amortizer.hpp"
#include "keygaze/analysis/coordination.hpp"
#include "keygaze/analysis/report_io.hpp"
#include "keygaze/core/dataset.hpp"
#include "keygaze/core/io.hpp"
#include "keygaze/metrics/multimatch.hpp"
#include "keygaze/metrics/similarity.hpp"
#include "keygaze/metrics/statistics.hpp"
#include "keygaze/model/trainer.hpp"
#include "keygaze/sim/simulator.hpp"

namespace keygaze::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

struct Globals {
    std::uint64_t seed = 0;
    unsigned threads = 1;
    std::string out;
    bool quiet = false;
};

/// Runs f(i) for i in [0, n) on up to `threads` workers. Callers write into
/// pre-sized slots so output order never depends on scheduling.
template <class F>
void parallel_for(std::size_t n, unsigned threads, F&& f) {
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t)
        pool.emplace_back([&, t] {
            try {
                for (std::size_t i = t; i < n; i += threads) f(i);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

inline HumanParams parse_theta(const std::string& s) {
    std::stringstream ss(s);
    std::string part;
    std::vector<double> v;
    while (std::getline(ss, part, ',')) {
        try {
            std::size_t used = 0;
            v.push_back(std::stod(part, &used));
            if (used != part.size()) throw std::invalid_argument(part);
        } catch (const std::logic_error&) {
            throw UsageError("--theta: '" + part + "' is not a number");
        }
    }
    if (v.size() != 3) throw UsageError("--theta expects e,f,l");
    HumanParams p{v[0], v[1], v[2]};
    for (double x : v)
        if (!(x >= 0.0 && x <= 1.0)) throw UsageError("--theta components must lie in [0,1]");
    return p;
}

inline std::string theta_string(const HumanParams& p) {
    return io::format_double(p.e_k) + "," + io::format_double(p.f_k) + "," + io::format_double(p.lambda);
}

inline KeyboardLayout load_layout(const std::string& path) {
    if (path.empty()) return default_layout();
    auto l = io::read_layout(path);
    validate(l);
    return l;
}

/// Manifest goes inside an output directory, or next to an output file.
inline fs::path manifest_path(const fs::path& out, bool is_dir) {
    return is_dir ? out / "manifest.json" : fs::path(out.string() + ".manifest.json");
}

class Run {
public:
    Run(std::string command, const Globals& g) : command_(std::move(command)), g_(g), t0_(Clock::now()) {
        config_ = json::object();
        inputs_ = json::array();
        outputs_ = json::array();
    }
    json& config() { return config_; }
    void input(const fs::path& p) { inputs_.push_back(p.string()); }
    void output(const fs::path& p) { outputs_.push_back(p.string()); }
    void note(const std::string& s) const {
        if (!g_.quiet) std::cerr << s << "\n";
    }
    void finish(const fs::path& manifest) const {
        json m = {{"command", command_},
                  {"config", config_},
                  {"seed", g_.seed},
                  {"threads", g_.threads},
                  {"inputs", inputs_},
                  {"outputs", outputs_},
                  {"versions", {{"keygaze", kVersion}, {"checkpoint_format", ad::Checkpoint::kVersion}}},
                  {"wall_clock_s", std::chrono::duration<double>(Clock::now() - t0_).count()}};
        if (manifest.has_parent_path()) fs::create_directories(manifest.parent_path());
        io::write_file_atomic(manifest, m.dump(2) + "\n");
    }

private:
    using Clock = std::chrono::steady_clock;
    std::string command_;
    Globals g_;
    Clock::time_point t0_;
    json config_, inputs_, outputs_;
};

inline fs::path require_out(const Globals& g, const char* cmd) {
    if (g.out.empty()) throw UsageError(std::string(cmd) + ": --out is required");
    return g.out;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
    std::size_t users = 10;
    std::size_t trials = 5;
    std::string theta;
    std::string phrases;
    std::string layout;
};

inline int cmd_simulate(const SimulateArgs& a, const Globals& g) {
    const fs::path out = require_out(g, "simulate");
    Run run("simulate", g);
    sim::SimConfig cfg;
    cfg.seed = g.seed;
    cfg.trials_per_user = a.trials;
    cfg.layout = load_layout(a.layout);
    if (!a.phrases.empty()) {
        cfg.phrases = sim::read_phrases(a.phrases);
        run.input(a.phrases);
    }
    std::optional<HumanParams> fixed;
    if (!a.theta.empty()) fixed = parse_theta(a.theta);
    if (a.trials == 0) throw UsageError("simulate: --trials must be >= 1");
    const auto ds = sim::simulate_dataset(cfg, a.users, fixed);

    fs::create_directories(out);
    io::write_keylogs(out / "keylog.jsonl", ds.logs());
    io::write_scanpaths(out / "scanpath.jsonl", ds.scanpaths());
    io::write_theta_csv(out / "theta.csv", ds.users);
    for (const char* f : {"keylog.jsonl", "scanpath.jsonl", "theta.csv"}) run.output(out / f);
    run.config() = {{"users", a.users}, {"trials", a.trials}, {"theta", a.theta}, {"phrases", a.phrases},
                    {"layout", a.layout}, {"phrase_count", cfg.phrases.size()}};
    run.note("simulated " + std::to_string(ds.trials.size()) + " trials for " + std::to_string(a.users) + " users");
    run.finish(manifest_path(out, true));
    return 0;
}

// ----------------------------------------------------------- fit-amortizer

struct FitAmortizerArgs {
    std::size_t users = 5000;
    std::size_t trials = 5;
    std::size_t epochs = 200;
    std::string layout;
};

inline int cmd_fit_amortizer(const FitAmortizerArgs& a, const Globals& g) {
    const fs::path out = require_out(g, "fit-amortizer");
    Run run("fit-amortizer", g);
    sim::SimConfig sc;
    sc.seed = g.seed;
    sc.trials_per_user = a.trials;
    sc.layout = load_layout(a.layout);
    if (a.trials == 0) throw UsageError("fit-amortizer: --trials must be >= 1");
    const auto pairs = amortizer::build_training_set(sc, a.users);
    amortizer::AmortizerConfig ac;
    ac.seed = g.seed;
    ac.epochs = a.epochs;
    amortizer::Amortizer am(ac);
    const auto rep = am.fit(pairs);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    ad::save_checkpoint(out, am.to_checkpoint());
    run.output(out);
    run.config() = {{"users", a.users},
                    {"trials", a.trials},
                    {"epochs", a.epochs},
                    {"hidden", ac.hidden},
                    {"lr", ac.lr},
                    {"batch", ac.batch},
                    {"holdout_fraction", ac.holdout_fraction},
                    {"heldout_mae", rep.heldout_mae},
                    {"baseline_mae", rep.baseline_mae},
                    {"final_train_loss", rep.final_train_loss}};
    char buf[160];
    std::snprintf(buf, sizeof buf, "held-out MAE e=%.4f f=%.4f l=%.4f (mean baseline %.4f %.4f %.4f)",
                  rep.heldout_mae[0], rep.heldout_mae[1], rep.heldout_mae[2], rep.baseline_mae[0],
                  rep.baseline_mae[1], rep.baseline_mae[2]);
    run.note(buf);
    run.finish(manifest_path(out, false));
    return 0;
}

// ------------------------------------------------------------------- train

struct TrainArgs {
    std::string data;
    std::size_t sim_trials = 300;
    std::size_t steps = 8000;
    std::size_t batch = 16;
    std::vector<std::string> ablate;
    std::string amortizer;
    std::string layout;
    double lr = 5e-5;
    std::size_t checkpoint_every = 500;
};

inline std::map<std::string, HumanParams> user_thetas(const fs::path& dir, const std::vector<KeypressLog>& logs,
                                                      const std::string& amortizer_ckpt,
                                                      const KeyboardLayout& layout, Run& run) {
    if (fs::exists(dir / "theta.csv")) {
        run.input(dir / "theta.csv");
        return io::read_theta_csv(dir / "theta.csv");
    }
    if (amortizer_ckpt.empty())
        throw UsageError("need " + (dir / "theta.csv").string() + " or --amortizer to obtain user parameters");
    run.input(amortizer_ckpt);
    const auto am = amortizer::Amortizer::from_checkpoint(ad::load_checkpoint(amortizer_ckpt));
    std::map<std::string, std::vector<KeypressLog>> by_user;
    for (const auto& l : logs) by_user[l.user_id].push_back(l);
    std::map<std::string, HumanParams> out;
    for (const auto& [u, ls] : by_user) out[u] = am.infer_theta(ls, layout);
    return out;
}

inline int cmd_train(const TrainArgs& a, const Globals& g) {
    const fs::path out = require_out(g, "train");
    Run run("train", g);
    model::ModelConfig mc;
    mc.seed = g.seed;
    for (const auto& s : a.ablate) {
        if (s == "sim") mc.loss.sim = false;
        else if (s == "len") mc.loss.len = false;
        else if (s == "f") mc.loss.f = false;
        else if (s == "v") mc.loss.v = false;
        else if (s == "params") mc.use_param_inference = false;
        else throw UsageError("--ablate: unknown term '" + s + "' (expected sim,len,f,v,params)");
    }
    mc.validate();
    const auto layout = load_layout(a.layout);

    std::vector<model::TrainSample> samples;
    std::size_t skipped = 0;
    if (!a.data.empty()) {
        const fs::path dir = a.data;
        run.input(dir / "keylog.jsonl");
        run.input(dir / "scanpath.jsonl");
        const auto logs = io::read_keylogs(dir / "keylog.jsonl");
        const auto paths = io::read_scanpaths(dir / "scanpath.jsonl");
        const auto pairs = join_trials(logs, paths);
        const auto thetas = user_thetas(dir, logs, a.amortizer, layout, run);
        for (const auto& p : pairs) {
            validate(p.log, layout.screen);
            validate(p.scanpath, layout.screen);
            auto it = thetas.find(p.log.user_id);
            if (it == thetas.end()) throw DataError("no parameters for user '" + p.log.user_id + "'");
            if (!model::fits(mc, p.log, p.scanpath)) {
                ++skipped;
                continue;
            }
            samples.push_back({p.log, p.scanpath, it->second});
        }
    }
    if (a.sim_trials > 0) {
        sim::SimConfig sc;
        sc.seed = g.seed;
        sc.layout = layout;
        // users are simulated until enough trials fit the model
        std::size_t got = 0;
        for (std::size_t u = 0; got < a.sim_trials; ++u) {
            if (u > 100 * (a.sim_trials + 10)) throw NumericalError("train: simulator produced no usable trials");
            for (std::size_t k = 0; k < sc.trials_per_user && got < a.sim_trials; ++k) {
                const auto t = sim::simulate_dataset_trial(sc, u, k);
                if (!model::fits(mc, t.trial.log, t.trial.scanpath)) {
                    ++skipped;
                    continue;
                }
                samples.push_back({t.trial.log, t.trial.scanpath, t.theta});
                ++got;
            }
        }
    }
    if (samples.empty()) throw UsageError("train: no training trials (give --data and/or --sim-trials)");
    if (skipped) run.note("skipped " + std::to_string(skipped) + " trials longer than the model window");

    model::TrainConfig tc;
    tc.steps = a.steps;
    tc.batch = a.batch;
    tc.seed = g.seed;
    tc.adam.lr = a.lr;
    tc.checkpoint_every = a.checkpoint_every;
    tc.out_dir = out;
    fs::create_directories(out);
    model::ScanpathModel m(mc, layout.screen);
    const std::size_t every = std::max<std::size_t>(1, a.steps / 20);
    const auto res = model::train(m, samples, tc, [&](const model::StepRecord& r) {
        if (r.step % every == 0 || r.step + 1 == a.steps) {
            char buf[128];
            std::snprintf(buf, sizeof buf, "step %zu loss %.5f (sim %.4f len %.4f f %.4f v %.4f)", r.step, r.loss.total,
                          r.loss.sim, r.loss.len, r.loss.f, r.loss.v);
            run.note(buf);
        }
    });
    for (const auto& d : res.diagnostics) run.note("note: " + d);
    run.output(out / "checkpoint.ckpt");
    run.output(out / "loss_history.csv");
    run.config() = {{"data", a.data},           {"sim_trials", a.sim_trials}, {"samples", samples.size()},
                    {"skipped", skipped},       {"steps", a.steps},           {"batch", a.batch},
                    {"lr", a.lr},               {"weight_decay", tc.adam.weight_decay},
                    {"lr_decay", tc.lr_decay},  {"decay_every", tc.decay_every},
                    {"ablate", a.ablate},       {"model", model::to_json(mc)}};
    run.finish(manifest_path(out, true));
    return 0;
}

// ------------------------------------------------------------------- infer

struct InferArgs {
    std::string ckpt;
    std::string keylog;
    std::string theta;
    std::string from_trials;
    std::string amortizer;
    std::string mode = "mean";
    std::string layout;
};

inline fs::path model_checkpoint_path(const fs::path& p) {
    return fs::is_directory(p) ? p / "checkpoint.ckpt" : p;
}

inline int cmd_infer(const InferArgs& a, const Globals& g) {
    const fs::path out = require_out(g, "infer");
    Run run("infer", g);
    if (a.theta.empty() == a.from_trials.empty()) throw UsageError("infer: give exactly one of --theta, --from-trials");
    model::DecodeMode mode;
    if (a.mode == "mean") mode = model::DecodeMode::Mean;
    else if (a.mode == "sample") mode = model::DecodeMode::Sample;
    else throw UsageError("--mode must be mean or sample");
    const auto layout = load_layout(a.layout);
    const fs::path ck = model_checkpoint_path(a.ckpt);
    run.input(ck);
    run.input(a.keylog);
    const auto m = model::ScanpathModel::from_checkpoint(ad::load_checkpoint(ck), layout.screen);
    const auto logs = io::read_keylogs(a.keylog);
    for (const auto& l : logs) validate(l, layout.screen);

    std::map<std::string, HumanParams> thetas;
    std::optional<HumanParams> fixed;
    if (!a.theta.empty()) {
        fixed = parse_theta(a.theta);
    } else {
        if (a.amortizer.empty()) throw UsageError("infer: --from-trials needs --amortizer");
        run.input(a.amortizer);
        const auto am = amortizer::Amortizer::from_checkpoint(ad::load_checkpoint(a.amortizer));
        const fs::path src = fs::is_directory(a.from_trials) ? fs::path(a.from_trials) / "keylog.jsonl"
                                                             : fs::path(a.from_trials);
        run.input(src);
        std::map<std::string, std::vector<KeypressLog>> by_user;
        for (auto& l : io::read_keylogs(src)) by_user[l.user_id].push_back(std::move(l));
        for (const auto& [u, ls] : by_user) thetas[u] = am.infer_theta(ls, layout);
    }

    std::vector<Scanpath> preds(logs.size());
    std::vector<char> degenerate(logs.size(), 0);
    parallel_for(logs.size(), g.threads, [&](std::size_t i) {
        HumanParams th;
        if (fixed) {
            th = *fixed;
        } else {
            auto it = thetas.find(logs[i].user_id);
            if (it == thetas.end()) throw DataError("no trials for user '" + logs[i].user_id + "' in --from-trials");
            th = it->second;
        }
        auto d = m.infer(logs[i], th, mode, sim::derive_seed(g.seed, i, 0x696e66));
        preds[i] = std::move(d.scanpath);
        degenerate[i] = d.degenerate ? 1 : 0;
    });
    std::size_t n_deg = 0;
    for (std::size_t i = 0; i < logs.size(); ++i)
        if (degenerate[i]) {
            ++n_deg;
            run.note("trial '" + logs[i].trial_id + "': no slot predicted valid, emitted one fixation");
        }
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    io::write_scanpaths(out, preds);
    run.output(out);
    run.config() = {{"ckpt", ck.string()}, {"keylog", a.keylog}, {"theta", a.theta}, {"from_trials", a.from_trials},
                    {"amortizer", a.amortizer}, {"mode", a.mode}, {"trials", logs.size()}, {"degenerate", n_deg}};
    run.finish(manifest_path(out, false));
    return 0;
}

// ------------------------------------------------------------- infer-theta

struct InferThetaArgs {
    std::string trials;
    std::string ckpt;
    std::string layout;
};

inline int cmd_infer_theta(const InferThetaArgs& a, const Globals& g) {
    Run run("infer-theta", g);
    const auto layout = load_layout(a.layout);
    const fs::path src = fs::is_directory(a.trials) ? fs::path(a.trials) / "keylog.jsonl" : fs::path(a.trials);
    run.input(src);
    run.input(a.ckpt);
    const auto am = amortizer::Amortizer::from_checkpoint(ad::load_checkpoint(a.ckpt));
    std::map<std::string, std::vector<KeypressLog>> by_user;
    for (auto& l : io::read_keylogs(src)) by_user[l.user_id].push_back(std::move(l));
    if (by_user.empty()) throw DataError("infer-theta: no trials in " + src.string());
    std::vector<std::pair<std::string, HumanParams>> rows;
    for (const auto& [u, ls] : by_user) rows.emplace_back(u, am.infer_theta(ls, layout));
    run.config() = {{"trials", a.trials}, {"ckpt", a.ckpt}, {"users", rows.size()}};
    if (g.out.empty()) {
        std::cout << "user_id,e_k,f_k,lambda\n";
        for (const auto& [u, p] : rows) std::cout << u << "," << theta_string(p) << "\n";
        return 0;
    }
    const fs::path out = g.out;
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    io::write_theta_csv(out, rows);
    run.output(out);
    run.finish(manifest_path(out, false));
    return 0;
}

// -------------------------------------------------------------------- eval

struct EvalArgs {
    std::string pred;
    std::string gt;
    std::string layout;
};

inline constexpr const char* kEvalColumns[] = {"dtwd",          "sted",          "mm_shape",
                                               "mm_direction",  "mm_length",     "mm_position",
                                               "mm_duration",   "fixation_count", "mean_fixation_duration",
                                               "gaze_shifts",   "keyboard_ratio", "proofreading_rate"};
inline constexpr std::size_t kEvalCount = 12;

/// One evaluation row; NaN marks a metric undefined for these lengths.
inline std::array<double, kEvalCount> eval_row(const Scanpath& pred, const Scanpath& gt, const ScreenGeometry& geom) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::array<double, kEvalCount> r;
    r.fill(nan);
    if (pred.empty() || gt.empty()) throw DataError("eval: empty scanpath for trial '" + gt.trial_id + "'");
    r[0] = metrics::dtwd(pred, gt, geom);
    if (pred.size() >= 3 && gt.size() >= 3) r[1] = metrics::sted(pred, gt, geom);
    if (pred.size() >= 2 && gt.size() >= 2) {
        const auto mm = metrics::multimatch(pred, gt, geom);
        r[2] = mm.shape;
        r[3] = mm.direction;
        r[4] = mm.length;
        r[5] = mm.position;
        r[6] = mm.duration;
    }
    r[7] = static_cast<double>(metrics::fixation_count(pred));
    r[8] = metrics::mean_fixation_duration(pred);
    r[9] = static_cast<double>(metrics::gaze_shifts(pred, geom));
    r[10] = metrics::gaze_on_keyboard_ratio(pred, geom);
    r[11] = metrics::proofreading_rate(pred, geom);
    return r;
}

/// "Mean(SD)" over finite values, sample SD.
inline std::string mean_sd(const std::vector<double>& v) {
    double s = 0.0;
    std::size_t n = 0;
    for (double x : v)
        if (std::isfinite(x)) {
            s += x;
            ++n;
        }
    if (n == 0) return "nan";
    const double mu = s / static_cast<double>(n);
    double ss = 0.0;
    for (double x : v)
        if (std::isfinite(x)) ss += (x - mu) * (x - mu);
    const double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f(%.2f)", mu, sd);
    return buf;
}

inline std::string eval_csv(const std::vector<std::string>& ids, const std::vector<std::array<double, kEvalCount>>& rows) {
    std::string out = "trial_id";
    for (const char* c : kEvalColumns) out += std::string(",") + c;
    out += "\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out += ids[i];
        for (double x : rows[i]) out += "," + (std::isfinite(x) ? io::format_double(x) : std::string("nan"));
        out += "\n";
    }
    out += "summary";
    for (std::size_t c = 0; c < kEvalCount; ++c) {
        std::vector<double> col;
        for (const auto& r : rows) col.push_back(r[c]);
        out += "," + mean_sd(col);
    }
    out += "\n";
    return out;
}

inline int cmd_eval(const EvalArgs& a, const Globals& g) {
    Run run("eval", g);
    const auto layout = load_layout(a.layout);
    run.input(a.pred);
    run.input(a.gt);
    const auto preds = io::read_scanpaths(a.pred);
    const auto gts = io::read_scanpaths(a.gt);
    const auto pred_by_id = index_by_trial(preds, "predictions");
    const auto gt_by_id = index_by_trial(gts, "ground truth");
    for (const auto& s : gts)
        if (!pred_by_id.count(s.trial_id)) throw DataError("trial_id '" + s.trial_id + "' missing from --pred");
    for (const auto& s : preds)
        if (!gt_by_id.count(s.trial_id)) throw DataError("trial_id '" + s.trial_id + "' missing from --gt");

    std::vector<std::array<double, kEvalCount>> rows(gts.size());
    std::vector<std::string> ids;
    for (const auto& s : gts) ids.push_back(s.trial_id);
    parallel_for(gts.size(), g.threads,
                 [&](std::size_t i) { rows[i] = eval_row(*pred_by_id.at(gts[i].trial_id), gts[i], layout.screen); });
    const std::string csv = eval_csv(ids, rows);
    run.config() = {{"pred", a.pred}, {"gt", a.gt}, {"trials", gts.size()}};
    if (g.out.empty()) {
        std::cout << csv;
        return 0;
    }
    const fs::path out = g.out;
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    io::write_file_atomic(out, csv);
    run.output(out);
    run.finish(manifest_path(out, false));
    return 0;
}

// ----------------------------------------------------------------- analyze

struct AnalyzeArgs {
    std::string data;
    std::string keylog;
    std::string scanpath;
    std::string layout;
    bool svg = false;
};

inline int cmd_analyze(const AnalyzeArgs& a, const Globals& g) {
    const fs::path out = require_out(g, "analyze");
    Run run("analyze", g);
    const auto layout = load_layout(a.layout);
    fs::path kl = a.keylog, sp = a.scanpath;
    if (!a.data.empty()) {
        if (kl.empty()) kl = fs::path(a.data) / "keylog.jsonl";
        if (sp.empty()) sp = fs::path(a.data) / "scanpath.jsonl";
    }
    if (kl.empty() || sp.empty()) throw UsageError("analyze: give --data dir or both --keylog and --scanpath");
    run.input(kl);
    run.input(sp);
    const auto pairs = join_trials(io::read_keylogs(kl), io::read_scanpaths(sp));
    for (const auto& p : pairs) {
        validate(p.log, layout.screen);
        validate(p.scanpath, layout.screen);
    }
    const auto report = analysis::analyze(pairs, layout);
    fs::create_directories(out);
    analysis::write_report(out, report, a.svg);
    for (const char* f : {"report.json", "distance_curve.csv", "ratio_by_iki.csv", "ratio_by_travel.csv",
                          "per_key_ratio.csv"})
        run.output(out / f);
    run.config() = {{"keylog", kl.string()}, {"scanpath", sp.string()}, {"svg", a.svg}, {"trials", pairs.size()}};
    run.finish(manifest_path(out, true));
    return 0;
}

// ---------------------------------------------------------------- dispatch

/// Parses argv and runs one subcommand. Exit codes: 0 ok, 1 usage,
/// 2 data, 3 numerical.
inline int dispatch(int argc, const char* const* argv) {
    CLI::App app{"Keypress-to-gaze scanpath tools"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--seed", g.seed, "Seed for all randomness");
    app.add_option("--threads", g.threads, "Worker threads for per-trial work")->check(CLI::Range(1u, 256u));
    app.add_option("--out", g.out, "Output file or directory");
    app.add_flag("--quiet", g.quiet, "Suppress progress output");

    SimulateArgs sa;
    auto* sim_cmd = app.add_subcommand("simulate", "Generate synthetic keylogs and scanpaths");
    sim_cmd->add_option("--users", sa.users)->check(CLI::PositiveNumber);
    sim_cmd->add_option("--trials", sa.trials)->check(CLI::PositiveNumber);
    sim_cmd->add_option("--theta", sa.theta, "Fixed e,f,l for every user");
    sim_cmd->add_option("--phrases", sa.phrases, "One sentence per line");
    sim_cmd->add_option("--layout", sa.layout);

    FitAmortizerArgs fa;
    auto* fit_cmd = app.add_subcommand("fit-amortizer", "Fit the metrics-to-parameters network on simulated users");
    fit_cmd->add_option("--users", fa.users)->check(CLI::PositiveNumber);
    fit_cmd->add_option("--trials", fa.trials)->check(CLI::PositiveNumber);
    fit_cmd->add_option("--epochs", fa.epochs)->check(CLI::PositiveNumber);
    fit_cmd->add_option("--layout", fa.layout);

    TrainArgs ta;
    auto* train_cmd = app.add_subcommand("train", "Train the scanpath model");
    train_cmd->add_option("--data", ta.data, "Directory with keylog.jsonl, scanpath.jsonl and optionally theta.csv");
    train_cmd->add_option("--sim-trials", ta.sim_trials);
    train_cmd->add_option("--steps", ta.steps);
    train_cmd->add_option("--batch", ta.batch)->check(CLI::PositiveNumber);
    train_cmd->add_option("--ablate", ta.ablate, "Comma list of sim,len,f,v,params")->delimiter(',');
    train_cmd->add_option("--amortizer", ta.amortizer, "Amortizer checkpoint when --data has no theta.csv");
    train_cmd->add_option("--lr", ta.lr);
    train_cmd->add_option("--checkpoint-every", ta.checkpoint_every);
    train_cmd->add_option("--layout", ta.layout);

    InferArgs ia;
    auto* infer_cmd = app.add_subcommand("infer", "Predict scanpaths for keylogs");
    infer_cmd->add_option("--ckpt", ia.ckpt)->required();
    infer_cmd->add_option("--keylog", ia.keylog)->required();
    infer_cmd->add_option("--theta", ia.theta);
    infer_cmd->add_option("--from-trials", ia.from_trials, "Keylogs (file or dir) to infer parameters from");
    infer_cmd->add_option("--amortizer", ia.amortizer);
    infer_cmd->add_option("--mode", ia.mode)->check(CLI::IsMember({"mean", "sample"}));
    infer_cmd->add_option("--layout", ia.layout);

    InferThetaArgs ita;
    auto* it_cmd = app.add_subcommand("infer-theta", "Infer per-user parameters from keylogs");
    it_cmd->add_option("--trials", ita.trials)->required();
    it_cmd->add_option("--ckpt", ita.ckpt)->required();
    it_cmd->add_option("--layout", ita.layout);

    EvalArgs ea;
    auto* eval_cmd = app.add_subcommand("eval", "Compare predicted and recorded scanpaths");
    eval_cmd->add_option("--pred", ea.pred)->required();
    eval_cmd->add_option("--gt", ea.gt)->required();
    eval_cmd->add_option("--layout", ea.layout);

    AnalyzeArgs aa;
    auto* an_cmd = app.add_subcommand("analyze", "Eye-hand coordination report");
    an_cmd->add_option("--data", aa.data);
    an_cmd->add_option("--keylog", aa.keylog);
    an_cmd->add_option("--scanpath", aa.scanpath);
    an_cmd->add_option("--layout", aa.layout);
    an_cmd->add_flag("--svg", aa.svg, "Also write SVG charts");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (*sim_cmd) return cmd_simulate(sa, g);
        if (*fit_cmd) return cmd_fit_amortizer(fa, g);
        if (*train_cmd) return cmd_train(ta, g);
        if (*infer_cmd) return cmd_infer(ia, g);
        if (*it_cmd) return cmd_infer_theta(ita, g);
        if (*eval_cmd) return cmd_eval(ea, g);
        if (*an_cmd) return cmd_analyze(aa, g);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 3;
    }
    return 1;
}

} // namespace keygaze::cli
