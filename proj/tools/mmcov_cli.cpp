// Copyright 2026 The MMCov Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// mmcov: command-line front end over the C API.
//
//   mmcov select --input a.mmcv --input b.mmcv --budget 64 --output out.jsonl
//   mmcov verify --trials 200 --seed 7
//   mmcov bench  --n 576 --m 40 --dim 4096 --budget 64
//   mmcov synth  --output sample.mmcv --n 576 --m 32
//   mmcov info   sample.mmcv
//
// Exit codes: 0 success, 1 data error or failed check, 2 usage error.

#include <atomic>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "mmcov/mmcov.h"

namespace {

constexpr int kExitData = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct OwnedString {
    char* ptr = nullptr;
    ~OwnedString() { mmcov_string_free(ptr); }
};

std::string describe(mmcov_status status) {
    std::string msg = mmcov_last_error();
    return msg.empty() ? mmcov_status_string(status) : msg;
}

struct SelectArgs {
    std::vector<std::string> inputs;
    std::optional<std::size_t> budget;
    std::optional<double> budget_ratio;
    std::optional<std::size_t> max_tokens;
    std::string mode = "mm";
    std::optional<double> tau_t;
    std::optional<double> tau_v;
    std::optional<double> alpha;
    std::string adaptive = "off";
    std::size_t grid_k = 2;
    std::string pooling = "none";
    std::string pool_max = "elementwise";
    std::string profile = "default";
    std::string output;
    std::size_t threads = 1;
    bool timing = false;
    bool global_crops = false;
    bool eager = false;
};

mmcov_mode parse_mode(const std::string& s) {
    if (s == "tv") return MMCOV_MODE_TEXT_VISION;
    if (s == "vv") return MMCOV_MODE_VISION_VISION;
    return MMCOV_MODE_MULTIMODAL;
}

mmcov_pooling parse_pooling(const std::string& s) {
    static const std::pair<const char*, mmcov_pooling> table[] = {
        {"none", MMCOV_POOL_NONE},           {"pre-mean", MMCOV_POOL_PRE_MEAN},
        {"pre-max", MMCOV_POOL_PRE_MAX},     {"pre-first", MMCOV_POOL_PRE_FIRST},
        {"post-mean", MMCOV_POOL_POST_MEAN}, {"post-max", MMCOV_POOL_POST_MAX},
        {"post-first", MMCOV_POOL_POST_FIRST},
    };
    for (const auto& [name, value] : table) {
        if (s == name) return value;
    }
    return MMCOV_POOL_NONE;
}

// Builds the config; any rejection here is a usage error.
mmcov_config* make_config(const SelectArgs& args) {
    if (args.budget.has_value() == args.budget_ratio.has_value()) {
        throw UsageError("exactly one of --budget or --budget-ratio is required");
    }
    if (args.budget_ratio && !args.max_tokens) {
        throw UsageError("--budget-ratio requires --max-tokens");
    }
    if (args.budget_ratio && !(*args.budget_ratio > 0.0 && *args.budget_ratio <= 1.0)) {
        throw UsageError("--budget-ratio must be in (0, 1]");
    }
    mmcov_config* config = nullptr;
    mmcov_config_create(&config);
    auto check = [&](mmcov_status st) {
        if (st != MMCOV_OK) {
            const std::string msg = describe(st);
            mmcov_config_free(config);
            throw UsageError(msg);
        }
    };
    check(mmcov_config_apply_profile(config, args.profile.c_str()));
    if (args.tau_t) check(mmcov_config_set_tau_t(config, *args.tau_t));
    if (args.tau_v) check(mmcov_config_set_tau_v(config, *args.tau_v));
    if (args.alpha) check(mmcov_config_set_alpha(config, *args.alpha));
    const std::size_t budget =
        args.budget ? *args.budget
                    : static_cast<std::size_t>(std::floor(*args.budget_ratio *
                                                          static_cast<double>(*args.max_tokens)));
    check(mmcov_config_set_budget(config, budget));
    if (args.max_tokens) check(mmcov_config_set_max_tokens(config, *args.max_tokens));
    check(mmcov_config_set_mode(config, parse_mode(args.mode)));
    check(mmcov_config_set_pooling(config, parse_pooling(args.pooling)));
    check(mmcov_config_set_pool_max_rule(config, args.pool_max == "elementwise" ? 0 : 1));
    if (args.adaptive == "bisect") {
        check(mmcov_config_set_adaptive_bisection(config, 0.0, 0.0, 1e-4));
    } else if (args.adaptive == "grid") {
        check(mmcov_config_set_adaptive_grid(config, args.grid_k, nullptr, 0));
    }
    check(mmcov_config_set_global_across_crops(config, args.global_crops ? 1 : 0));
    check(mmcov_config_set_lazy(config, args.eager ? 0 : 1));
    check(mmcov_config_validate(config));
    return config;
}

struct Outcome {
    bool done = false;
    bool ok = false;
    std::string text;  // record line or error message
};

Outcome process_one(const std::string& path, const mmcov_config* config, std::size_t threads,
                    bool timing) {
    Outcome out;
    out.done = true;
    mmcov_sample* sample = nullptr;
    mmcov_status st = mmcov_sample_read(path.c_str(), &sample);
    if (st != MMCOV_OK) {
        out.text = describe(st);
        return out;
    }
    mmcov_result* result = nullptr;
    st = mmcov_select(sample, config, threads, &result);
    mmcov_sample_free(sample);
    if (st != MMCOV_OK) {
        out.text = describe(st);
        return out;
    }
    OwnedString json;
    st = mmcov_result_to_json(result, path.c_str(), timing ? 1 : 0, &json.ptr);
    mmcov_result_free(result);
    if (st != MMCOV_OK) {
        out.text = describe(st);
        return out;
    }
    out.ok = true;
    out.text = json.ptr;
    return out;
}

int run_select(const SelectArgs& args) {
    mmcov_config* config = make_config(args);
    std::unique_ptr<mmcov_config, decltype(&mmcov_config_free)> config_guard(config,
                                                                             mmcov_config_free);

    std::ofstream file;
    std::ostream* sink = &std::cout;
    if (!args.output.empty()) {
        file.open(args.output, std::ios::binary | std::ios::trunc);
        if (!file) {
            std::cerr << "mmcov: cannot open " << args.output << " for writing\n";
            return kExitData;
        }
        sink = &file;
    }

    const std::size_t count = args.inputs.size();
    const std::size_t workers = std::max<std::size_t>(1, std::min(args.threads, count));
    // A lone input gets the threads for its own similarity builds instead.
    const std::size_t inner_threads = count == 1 ? std::max<std::size_t>(1, args.threads) : 1;

    std::vector<Outcome> outcomes(count);
    std::mutex mu;
    std::condition_variable ready;
    std::atomic<std::size_t> next{0};
    std::atomic<bool> abort{false};

    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count || abort.load()) return;
                Outcome o = process_one(args.inputs[i], config, inner_threads, args.timing);
                {
                    std::lock_guard lock(mu);
                    outcomes[i] = std::move(o);
                }
                ready.notify_all();
            }
        });
    }

    // Reorder buffer: records leave strictly in input order.
    int exit_code = 0;
    for (std::size_t i = 0; i < count; ++i) {
        Outcome o;
        {
            std::unique_lock lock(mu);
            ready.wait(lock, [&] { return outcomes[i].done; });
            o = std::move(outcomes[i]);
        }
        if (!o.ok) {
            std::cerr << "mmcov: sample " << args.inputs[i] << ": " << o.text << "\n";
            abort.store(true);
            exit_code = kExitData;
            break;
        }
        *sink << o.text << '\n';
    }
    pool.clear();
    sink->flush();
    if (!*sink && exit_code == 0) {
        std::cerr << "mmcov: write failed\n";
        exit_code = kExitData;
    }
    return exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multimodal coverage vision-token selection"};
    app.require_subcommand(1);

    SelectArgs sel;
    auto* select = app.add_subcommand("select", "Select vision tokens for embedding dumps");
    select->add_option("--input", sel.inputs, "Embedding dump (repeatable)")->required();
    select->add_option("--budget", sel.budget, "Token budget K");
    select->add_option("--budget-ratio", sel.budget_ratio, "Budget as a ratio of --max-tokens");
    select->add_option("--max-tokens", sel.max_tokens,
                       "Token count the budget refers to (for crop ratios)");
    select->add_option("--mode", sel.mode, "Coverage objective")
        ->check(CLI::IsMember({"tv", "vv", "mm"}));
    select->add_option("--tau-t", sel.tau_t, "Text-vision temperature (default 0.02)");
    select->add_option("--tau-v", sel.tau_v, "Vision-vision temperature (default 0.2)");
    select->add_option("--alpha", sel.alpha, "Vision-vision weight (default 0.5)");
    select->add_option("--adaptive", sel.adaptive, "Adaptive vision temperature")
        ->check(CLI::IsMember({"off", "bisect", "grid"}));
    select->add_option("--grid-k", sel.grid_k, "k-th largest used by grid search");
    select->add_option("--pooling", sel.pooling, "Word pooling")
        ->check(CLI::IsMember({"none", "pre-mean", "pre-max", "pre-first", "post-mean",
                               "post-max", "post-first"}));
    select->add_option("--pool-max", sel.pool_max, "Pre-pool max rule")
        ->check(CLI::IsMember({"elementwise", "peak-row"}));
    select->add_option("--profile", sel.profile, "Parameter profile")
        ->check(CLI::IsMember({"default", "qwen"}));
    select->add_option("--output", sel.output, "Output file (line-delimited JSON); stdout if unset");
    select->add_option("--threads", sel.threads, "Worker threads")->check(CLI::PositiveNumber);
    select->add_flag("--timing", sel.timing, "Include per-stage wall time in records");
    select->add_flag("--global-crops", sel.global_crops, "Select across crops instead of per crop");
    select->add_flag("--eager", sel.eager, "Use eager instead of lazy greedy");

    mmcov_verify_params vp;
    mmcov_verify_defaults(&vp);
    bool inject_fault = false;
    auto* verify = app.add_subcommand("verify", "Check greedy against the exhaustive oracle");
    verify->add_option("--trials", vp.trials, "Random instances")->capture_default_str();
    verify->add_option("--seed", vp.seed, "RNG seed")->capture_default_str();
    verify->add_option("--max-n", vp.max_n, "Largest instance side")->capture_default_str();
    verify->add_option("--max-k", vp.max_k, "Largest budget")->capture_default_str();
    verify->add_option("--chains", vp.chains, "Submodularity chains")->capture_default_str();
    verify->add_flag("--inject-fault", inject_fault, "Negative control: sabotage greedy")
        ->group("");

    mmcov_bench_params bp;
    mmcov_bench_defaults(&bp);
    std::vector<std::size_t> bench_crops;
    auto* bench = app.add_subcommand("bench", "Time the pipeline on a synthetic sample");
    bench->add_option("--n", bp.n, "Vision tokens")->capture_default_str();
    bench->add_option("--m", bp.m, "Text tokens")->capture_default_str();
    bench->add_option("--dim", bp.dim, "Embedding width")->capture_default_str();
    bench->add_option("--budget", bp.budget, "Token budget")->capture_default_str();
    bench->add_option("--reps", bp.reps, "Repetitions")->capture_default_str();
    bench->add_option("--threads", bp.threads, "Threads")->capture_default_str();
    bench->add_option("--seed", bp.seed, "RNG seed")->capture_default_str();
    bench->add_option("--crops", bench_crops, "Crop sizes (must sum to --n)");

    mmcov_synth_params sp{576, 32, 0, 64, 64, 0, 0, nullptr, 0};
    std::vector<std::size_t> synth_crops;
    std::string synth_output;
    std::size_t synth_count = 1;
    bool synth_spans = false;
    auto* synth = app.add_subcommand("synth", "Write synthetic embedding dumps");
    synth->add_option("--output", synth_output,
                      "Dump path; with --count > 1 a directory for sample_NNNN.mmcv")
        ->required();
    synth->add_option("--n", sp.n, "Vision tokens")->capture_default_str();
    synth->add_option("--m", sp.m, "Text tokens")->capture_default_str();
    synth->add_option("--o", sp.o, "Agent tokens")->capture_default_str();
    synth->add_option("--dim-pre", sp.dim_pre, "Pre-projection width")->capture_default_str();
    synth->add_option("--dim-post", sp.dim_post, "Post-projection width")->capture_default_str();
    synth->add_option("--seed", sp.seed, "Seed (sample i uses seed + i)")->capture_default_str();
    synth->add_option("--count", synth_count, "Number of samples")->capture_default_str();
    synth->add_flag("--spans", synth_spans, "Include random word spans");
    synth->add_option("--crops", synth_crops, "Crop sizes (must sum to --n)");

    std::string info_path;
    auto* info = app.add_subcommand("info", "Print a dump's header counts");
    info->add_option("path", info_path, "Dump file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*select) return run_select(sel);

        if (*verify) {
            vp.inject_fault = inject_fault ? 1 : 0;
            mmcov_verify_report report;
            OwnedString text;
            const mmcov_status st = mmcov_verify(&vp, &report, &text.ptr);
            if (st != MMCOV_OK) {
                std::cerr << "mmcov: " << describe(st) << "\n";
                return st == MMCOV_ERR_INVALID_ARGUMENT ? kExitUsage : kExitData;
            }
            std::cout << text.ptr;
            return report.ok ? 0 : kExitData;
        }

        if (*bench) {
            bp.crop_sizes = bench_crops.empty() ? nullptr : bench_crops.data();
            bp.num_crops = bench_crops.size();
            mmcov_bench_report report;
            OwnedString text;
            const mmcov_status st = mmcov_bench(&bp, &report, &text.ptr);
            if (st != MMCOV_OK) {
                std::cerr << "mmcov: " << describe(st) << "\n";
                return kExitData;
            }
            std::cout << text.ptr;
            return 0;
        }

        if (*synth) {
            sp.with_spans = synth_spans ? 1 : 0;
            sp.crop_sizes = synth_crops.empty() ? nullptr : synth_crops.data();
            sp.num_crops = synth_crops.size();
            if (synth_count > 1) std::filesystem::create_directories(synth_output);
            const std::uint64_t base_seed = sp.seed;
            for (std::size_t i = 0; i < synth_count; ++i) {
                sp.seed = base_seed + i;
                std::string path = synth_output;
                if (synth_count > 1) {
                    char name[32];
                    std::snprintf(name, sizeof(name), "sample_%04zu.mmcv", i);
                    path = (std::filesystem::path(synth_output) / name).string();
                }
                mmcov_sample* sample = nullptr;
                mmcov_status st = mmcov_sample_synth(&sp, &sample);
                if (st == MMCOV_OK) st = mmcov_sample_write(sample, path.c_str());
                mmcov_sample_free(sample);
                if (st != MMCOV_OK) {
                    std::cerr << "mmcov: " << path << ": " << describe(st) << "\n";
                    return st == MMCOV_ERR_INVALID_ARGUMENT ? kExitUsage : kExitData;
                }
            }
            return 0;
        }

        if (*info) {
            mmcov_sample* sample = nullptr;
            const mmcov_status st = mmcov_sample_read(info_path.c_str(), &sample);
            if (st != MMCOV_OK) {
                std::cerr << "mmcov: " << info_path << ": " << describe(st) << "\n";
                return kExitData;
            }
            mmcov_sample_info si;
            mmcov_sample_info_get(sample, &si);
            mmcov_sample_free(sample);
            std::cout << "n " << si.n << "\nm " << si.m << "\no " << si.o << "\ndim_pre "
                      << si.dim_pre << "\ndim_post " << si.dim_post << "\nspans " << si.num_spans
                      << "\ncrops " << si.num_crops << "\n";
            return 0;
        }
    } catch (const UsageError& e) {
        std::cerr << "mmcov: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "mmcov: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}
