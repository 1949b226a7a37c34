// sportscorpus command-line tool: two-step web-corpus filtering (URL keyword
// pre-filter + trained text classifier), coordinator/worker distribution,
// reduce-phase tokenization, and the generation benchmark with LLM judges.
//
// Subcommands mirror the pipeline stages: filter, train-classifier,
// eval-classifier, coordinator, worker, tokenize, bench-run, bench-replay,
// report. Data goes to stdout or files; progress and stats go to stderr.

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sportscorpus/bench.hpp"
#include "sportscorpus/bench_http.hpp"
#include "sportscorpus/bench_run.hpp"
#include "sportscorpus/classifier.hpp"
#include "sportscorpus/corpus.hpp"
#include "sportscorpus/pipeline.hpp"
#include "sportscorpus/pipeline_http.hpp"
#include "sportscorpus/tokenizer.hpp"
#include "sportscorpus/urlfilter.hpp"
#include "sportscorpus/util.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using sportscorpus::Error;

namespace {

void require_file(const std::string& path) {
    if (!fs::exists(path)) throw Error("io", "input file does not exist: " + path);
    if (fs::is_directory(path)) throw Error("io", "expected a file, got a directory: " + path);
}

// ---- filter ----

struct FilterArgs {
    std::vector<std::string> inputs;
    std::string out;
    std::string out_dir;
    std::string keywords = "default";
    std::string model;
    double threshold = 0.5;
    std::string stats_path;
    int jobs = 0;
};

struct ByteCounters {
    std::uint64_t bytes_in = 0;
    std::uint64_t bytes_url_pass = 0;
    std::uint64_t bytes_kept = 0;

    ByteCounters& operator+=(const ByteCounters& o) {
        bytes_in += o.bytes_in;
        bytes_url_pass += o.bytes_url_pass;
        bytes_kept += o.bytes_kept;
        return *this;
    }
};

void filter_one(const std::string& input, const std::string& output,
                const sportscorpus::urlfilter::KeywordSet& keywords,
                const sportscorpus::classifier::ClassifierModel* model, double threshold,
                sportscorpus::corpus::ShardStats& stats, ByteCounters& bytes) {
    sportscorpus::corpus::ShardReader reader(input);
    sportscorpus::corpus::ShardWriter writer(output);
    sportscorpus::corpus::WebRecord rec;
    while (reader.next(rec)) {
        ++stats.n_in;
        bytes.bytes_in += rec.text.size();
        if (!keywords.match(rec.url)) continue;
        ++stats.n_url_pass;
        bytes.bytes_url_pass += rec.text.size();
        if (model) {
            double score = sportscorpus::classifier::predict(*model, rec.text);
            if (score < threshold) continue;
            rec.score = score;
        }
        writer.write(rec);
        bytes.bytes_kept += rec.text.size();
    }
    stats.n_kept = writer.count();
    writer.flush();
}

int cmd_filter(const FilterArgs& args, bool json_out) {
    for (const auto& in : args.inputs) require_file(in);
    if (args.inputs.size() > 1 && args.out_dir.empty())
        throw Error("config", "multiple --in files need --out-dir");
    if (args.inputs.size() == 1 && args.out.empty() && args.out_dir.empty())
        throw Error("config", "need --out or --out-dir");
    if (!args.model.empty()) require_file(args.model);
    if (!args.out_dir.empty()) fs::create_directories(args.out_dir);

    auto keywords = sportscorpus::urlfilter::load_keywords(args.keywords);
    std::optional<sportscorpus::classifier::ClassifierModel> model;
    if (!args.model.empty()) model = sportscorpus::classifier::load_model(args.model);

    auto output_for = [&](const std::string& input) {
        if (!args.out.empty() && args.inputs.size() == 1) return args.out;
        return (fs::path(args.out_dir) / fs::path(input).filename()).string();
    };

    std::vector<sportscorpus::corpus::ShardStats> stats(args.inputs.size());
    std::vector<ByteCounters> bytes(args.inputs.size());
    int jobs = args.jobs > 0 ? args.jobs
                             : static_cast<int>(std::thread::hardware_concurrency());
    jobs = std::max(1, std::min<int>(jobs, static_cast<int>(args.inputs.size())));

    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::string first_error;
    std::mutex error_mu;
    auto run = [&] {
        for (std::size_t i = next.fetch_add(1); i < args.inputs.size(); i = next.fetch_add(1)) {
            try {
                filter_one(args.inputs[i], output_for(args.inputs[i]), keywords,
                           model ? &*model : nullptr, args.threshold, stats[i], bytes[i]);
            } catch (const std::exception& e) {
                std::lock_guard lock(error_mu);
                if (!failed.exchange(true)) first_error = e.what();
            }
        }
    };
    if (jobs == 1) {
        run();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < jobs; ++t) pool.emplace_back(run);
        for (auto& t : pool) t.join();
    }
    if (failed.load()) throw Error("io", first_error);

    sportscorpus::corpus::ShardStats total;
    ByteCounters total_bytes;
    for (std::size_t i = 0; i < args.inputs.size(); ++i) {
        total += stats[i];
        total_bytes += bytes[i];
        std::fprintf(stderr, "filter: %s: n_in=%llu n_url_pass=%llu n_kept=%llu\n",
                     args.inputs[i].c_str(), static_cast<unsigned long long>(stats[i].n_in),
                     static_cast<unsigned long long>(stats[i].n_url_pass),
                     static_cast<unsigned long long>(stats[i].n_kept));
    }
    std::fprintf(stderr, "filter: total n_in=%llu n_url_pass=%llu n_kept=%llu\n",
                 static_cast<unsigned long long>(total.n_in),
                 static_cast<unsigned long long>(total.n_url_pass),
                 static_cast<unsigned long long>(total.n_kept));
    if (total.n_in > 0) {
        // reduction is reported both by document count and by text bytes;
        // the count-based figure is the primary one
        std::fprintf(stderr,
                     "filter: url_reduction=%.4f total_reduction=%.4f "
                     "bytes_in=%llu bytes_kept=%llu\n",
                     sportscorpus::corpus::reduction_ratio(total),
                     sportscorpus::corpus::total_reduction(total),
                     static_cast<unsigned long long>(total_bytes.bytes_in),
                     static_cast<unsigned long long>(total_bytes.bytes_kept));
    }
    json stats_json = sportscorpus::corpus::stats_to_json(total);
    stats_json["bytes_in"] = total_bytes.bytes_in;
    stats_json["bytes_url_pass"] = total_bytes.bytes_url_pass;
    stats_json["bytes_kept"] = total_bytes.bytes_kept;
    if (!args.stats_path.empty())
        sportscorpus::write_text_file(args.stats_path, stats_json.dump(2) + "\n");
    if (json_out) std::cout << stats_json.dump() << "\n";
    return 0;
}

// ---- classifier ----

struct TrainArgs {
    std::string data;
    std::string out;
    int epochs = 10;
    double learning_rate = 3e-4;
    int batch_size = 32;
    std::uint64_t seed = 0;
    std::uint32_t hash_dim = 1u << 18;
    std::vector<int> ngrams = {1, 2};
    std::string normalization = "l2";
    double threshold = 0.5;
};

int cmd_train_classifier(const TrainArgs& args) {
    require_file(args.data);
    auto data = sportscorpus::classifier::load_training_file(args.data);
    sportscorpus::classifier::TrainConfig cfg;
    cfg.epochs = args.epochs;
    cfg.learning_rate = args.learning_rate;
    cfg.batch_size = args.batch_size;
    cfg.shuffle_seed = args.seed;
    sportscorpus::classifier::FeaturizerConfig fcfg;
    fcfg.hash_dimension = args.hash_dim;
    fcfg.ngram_orders = args.ngrams;
    if (args.normalization == "l2")
        fcfg.normalization = sportscorpus::classifier::Normalization::l2;
    else if (args.normalization == "none")
        fcfg.normalization = sportscorpus::classifier::Normalization::none;
    else
        throw Error("config", "normalization must be l2 or none");

    auto result = sportscorpus::classifier::train(data, cfg, fcfg);
    std::fprintf(stderr, "train: %zu examples, initial loss %.6f\n", data.size(),
                 result.initial_loss);
    for (std::size_t e = 0; e < result.epoch_losses.size(); ++e)
        std::fprintf(stderr, "train: epoch %zu loss %.6f\n", e + 1, result.epoch_losses[e]);
    result.model.threshold = args.threshold;
    sportscorpus::classifier::save_model(result.model, args.out);
    std::fprintf(stderr, "train: model written to %s\n", args.out.c_str());
    return 0;
}

int cmd_eval_classifier(const std::string& model_path, const std::string& data_path,
                        bool json_out) {
    require_file(model_path);
    require_file(data_path);
    auto model = sportscorpus::classifier::load_model(model_path);
    auto data = sportscorpus::classifier::load_training_file(data_path);
    auto report = sportscorpus::classifier::evaluate(model, data);
    if (json_out)
        std::cout << sportscorpus::classifier::metrics_to_json(report).dump(2) << "\n";
    else
        std::cout << sportscorpus::classifier::render_metrics(report);
    return 0;
}

// ---- coordinator / worker ----

struct CoordinatorArgs {
    std::string tasks;
    std::string listen = "127.0.0.1:8700";
    std::string log = "coordinator.log";
    int timeout_secs = 60;
    int max_attempts = 3;
    bool resume = false;
    std::string out_manifest;
    std::string port_file;
    int tick_ms = 250;
};

int cmd_coordinator(const CoordinatorArgs& args) {
    sportscorpus::pipeline::CoordinatorOptions options;
    options.timeout_ms = static_cast<std::int64_t>(args.timeout_secs) * 1000;
    options.max_attempts = args.max_attempts;
    options.log_path = args.log;

    std::optional<sportscorpus::pipeline::Coordinator> coordinator;
    if (args.resume) {
        require_file(args.log);
        coordinator.emplace(sportscorpus::pipeline::Coordinator::ResumeFromLog{}, options);
    } else {
        if (args.tasks.empty())
            throw Error("config", "--tasks is required unless --resume is given");
        require_file(args.tasks);
        coordinator.emplace(sportscorpus::pipeline::load_tasks_file(args.tasks), options);
    }

    auto [host, port] = sportscorpus::pipeline::detail::split_host_port(args.listen);
    sportscorpus::pipeline::CoordinatorServer server(*coordinator, args.tick_ms);
    if (port == 0)
        port = server.listen_on_any_port(host);
    else
        server.listen(host, port);
    if (!args.port_file.empty())
        sportscorpus::write_text_file(args.port_file, std::to_string(port) + "\n");
    std::fprintf(stderr, "coordinator: listening on %s:%d, log %s\n", host.c_str(), port,
                 args.log.c_str());

    server.wait_until_finished();
    auto manifest = coordinator->manifest();
    server.stop();
    json out = sportscorpus::pipeline::manifest_to_json(manifest);
    if (args.out_manifest.empty())
        std::cout << out.dump(2) << "\n";
    else
        sportscorpus::write_text_file(args.out_manifest, out.dump(2) + "\n");
    std::fprintf(stderr, "coordinator: run finished, %zu outputs, %zu failed tasks\n",
                 manifest.output_uris.size(), manifest.failed_task_ids.size());
    return 0;
}

struct WorkerArgs {
    std::string coordinator_url;
    std::string keywords = "default";
    std::string model;
    std::string out_dir = ".";
    std::string worker_id;
    int poll_ms = 500;
    int heartbeat_secs = 10;
};

int cmd_worker(const WorkerArgs& args) {
    if (!args.model.empty()) require_file(args.model);
    auto keywords = sportscorpus::urlfilter::load_keywords(args.keywords);
    std::optional<sportscorpus::classifier::ClassifierModel> model;
    if (!args.model.empty()) model = sportscorpus::classifier::load_model(args.model);
    fs::create_directories(args.out_dir);

    sportscorpus::pipeline::EnvResolver resolver(&keywords, model ? &*model : nullptr,
                                                 args.out_dir);
    sportscorpus::pipeline::HttpWorkerOptions options;
    options.worker_id = args.worker_id.empty()
                            ? "worker-" + std::to_string(static_cast<long>(::getpid()))
                            : args.worker_id;
    options.poll_ms = args.poll_ms;
    options.heartbeat_secs = args.heartbeat_secs;
    options.on_event = [](const std::string& msg) {
        std::fprintf(stderr, "worker: %s\n", msg.c_str());
    };
    int completed =
        sportscorpus::pipeline::run_http_worker(args.coordinator_url, resolver, options);
    std::fprintf(stderr, "worker: done, %d tasks completed\n", completed);
    return 0;
}

// ---- tokenize ----

int cmd_tokenize(const std::string& vocab_path, const std::string& in_path,
                 const std::string& out_path) {
    require_file(vocab_path);
    require_file(in_path);
    auto vocab = sportscorpus::tokenizer::load_vocabulary(vocab_path);
    sportscorpus::corpus::ShardReader reader(in_path);
    std::vector<std::uint32_t> ids;
    sportscorpus::corpus::WebRecord rec;
    std::uint64_t records = 0;
    while (reader.next(rec)) {
        ++records;
        try {
            auto encoded = sportscorpus::tokenizer::encode(rec.text, vocab);
            ids.insert(ids.end(), encoded.begin(), encoded.end());
        } catch (const sportscorpus::tokenizer::EncodeError& e) {
            throw Error("data", in_path + ": record \"" + rec.id + "\": " + e.what());
        }
    }
    sportscorpus::tokenizer::write_token_shard(ids, out_path);
    std::fprintf(stderr, "tokenize: %llu records -> %zu tokens -> %s\n",
                 static_cast<unsigned long long>(records), ids.size(), out_path.c_str());
    return 0;
}

// ---- bench ----

struct BenchRunArgs {
    std::string prompts;
    std::string models;
    std::string judges;
    std::string transcript = "bench_transcript.jsonl";
    std::string report_out;
    double temperature = 1.0;
    double top_p = 0.3;
    int max_tokens = 80;
    std::uint64_t seed = 0;
    int retries = 3;
    double min_fill = 0.95;
};

json load_json_file(const std::string& path) {
    try {
        return json::parse(sportscorpus::read_text_file(path));
    } catch (const json::exception& e) {
        throw Error("format", path + ": malformed JSON: " + e.what());
    }
}

void emit_report(const sportscorpus::bench::BenchmarkReport& report,
                 const std::string& report_out, bool json_out, const std::string& baseline = {}) {
    json j = sportscorpus::bench::report_to_json(report);
    if (!report_out.empty()) sportscorpus::write_text_file(report_out, j.dump(2) + "\n");
    if (json_out)
        std::cout << j.dump(2) << "\n";
    else
        std::cout << sportscorpus::bench::render_report_table(report, baseline);
}

int cmd_bench_run(const BenchRunArgs& args, bool json_out) {
    require_file(args.prompts);
    require_file(args.models);
    require_file(args.judges);
    auto prompts = sportscorpus::bench::load_prompt_set(args.prompts);
    for (const auto& w : prompts.warnings) std::fprintf(stderr, "bench: warning: %s\n", w.c_str());
    auto models =
        sportscorpus::bench::make_generators_with_http(load_json_file(args.models), args.models);
    auto judges =
        sportscorpus::bench::make_judges_with_http(load_json_file(args.judges), args.judges);

    sportscorpus::bench::RunOptions options;
    options.generation.temperature = args.temperature;
    options.generation.top_p = args.top_p;
    options.generation.max_tokens = args.max_tokens;
    options.generation.seed = args.seed;
    options.max_retries = args.retries;
    options.min_fill = args.min_fill;
    options.transcript_path = args.transcript;

    auto out = sportscorpus::bench::run_benchmark(models, judges, prompts, options);
    std::fprintf(stderr,
                 "bench: %zu generations (%zu failed), %zu judge replies (%zu failed), "
                 "transcript %s\n",
                 out.generations, out.generation_failures, out.judge_replies,
                 out.judge_failures, out.transcript_path.c_str());
    emit_report(out.report, args.report_out, json_out);
    return 0;
}

int cmd_bench_replay(const std::string& transcript, const std::string& report_out,
                     bool json_out) {
    require_file(transcript);
    auto report = sportscorpus::bench::replay_transcript(transcript);
    emit_report(report, report_out, json_out);
    return 0;
}

int cmd_report(const std::string& scores, const std::string& baseline, bool json_out) {
    require_file(scores);
    auto report = sportscorpus::bench::load_scores_file(scores);
    emit_report(report, {}, json_out, baseline);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sports web-corpus extraction and generation benchmark toolkit"};
    app.require_subcommand(1);
    bool json_out = false;
    app.add_flag("--json", json_out, "machine-readable JSON on stdout instead of text tables");

    FilterArgs filter_args;
    auto* filter = app.add_subcommand(
        "filter", "two-step shard filtering: URL keywords, then optional classifier");
    filter->add_option("--in", filter_args.inputs, "input shard (JSON lines); repeatable")
        ->required();
    filter->add_option("--out", filter_args.out, "output shard path (single --in only)");
    filter->add_option("--out-dir", filter_args.out_dir, "output directory (kept filenames)");
    filter->add_option("--keywords", filter_args.keywords,
                       "keyword config file, or \"default\" for the built-in set");
    filter->add_option("--model", filter_args.model, "classifier model file; enables step 2");
    filter->add_option("--threshold", filter_args.threshold,
                       "classifier keep threshold (default 0.5)");
    filter->add_option("--stats", filter_args.stats_path, "write merged stats JSON here");
    filter->add_option("--jobs", filter_args.jobs,
                       "parallel shard workers (default: hardware threads)");

    TrainArgs train_args;
    auto* train = app.add_subcommand("train-classifier",
                                     "train the hashed n-gram logistic classifier");
    train->add_option("--data", train_args.data, "labeled shard file (records with `label`)")
        ->required();
    train->add_option("--out", train_args.out, "model output path")->required();
    train->add_option("--epochs", train_args.epochs, "training epochs (default 10)");
    train->add_option("--learning-rate", train_args.learning_rate,
                      "gradient step size (default 3e-4)");
    train->add_option("--batch-size", train_args.batch_size, "mini-batch size (default 32)");
    train->add_option("--seed", train_args.seed, "shuffle seed (default 0)");
    train->add_option("--hash-dim", train_args.hash_dim,
                      "feature hash dimension, power of two (default 262144)");
    train->add_option("--ngram", train_args.ngrams, "n-gram orders; repeatable (default 1 2)");
    train->add_option("--normalization", train_args.normalization, "l2 or none (default l2)");
    train->add_option("--threshold", train_args.threshold,
                      "decision threshold stored in the model (default 0.5)");

    std::string eval_model, eval_data;
    auto* eval = app.add_subcommand("eval-classifier",
                                    "precision/recall/F1 report on a labeled shard");
    eval->add_option("--model", eval_model, "model file")->required();
    eval->add_option("--data", eval_data, "labeled shard file")->required();

    CoordinatorArgs coordinator_args;
    auto* coordinator =
        app.add_subcommand("coordinator", "serve shard tasks to workers over HTTP");
    coordinator->add_option("--tasks", coordinator_args.tasks,
                            "task manifest (JSON array or JSON lines)");
    coordinator->add_option("--listen", coordinator_args.listen,
                            "host:port to bind (port 0 picks a free port)");
    coordinator->add_option("--log", coordinator_args.log,
                            "append-only state log (default coordinator.log)");
    coordinator->add_option("--timeout-secs", coordinator_args.timeout_secs,
                            "task lease before reassignment (default 60)");
    coordinator->add_option("--max-attempts", coordinator_args.max_attempts,
                            "attempts before a task is FAILED (default 3)");
    coordinator->add_flag("--resume", coordinator_args.resume,
                          "resume a run by replaying --log instead of reading --tasks");
    coordinator->add_option("--out-manifest", coordinator_args.out_manifest,
                            "write the final run manifest here (default: stdout)");
    coordinator->add_option("--port-file", coordinator_args.port_file,
                            "write the bound port to this file once listening");
    coordinator->add_option("--tick-ms", coordinator_args.tick_ms,
                            "timeout sweep interval in ms (default 250)");

    WorkerArgs worker_args;
    auto* worker = app.add_subcommand("worker", "process shard tasks from a coordinator");
    worker->add_option("--coordinator", worker_args.coordinator_url,
                       "coordinator address (host:port)")
        ->required();
    worker->add_option("--keywords", worker_args.keywords,
                       "keyword config file, or \"default\" for the built-in set");
    worker->add_option("--model", worker_args.model, "classifier model for classify steps");
    worker->add_option("--out-dir", worker_args.out_dir, "directory for output shards");
    worker->add_option("--worker-id", worker_args.worker_id, "stable worker id (default: pid)");
    worker->add_option("--poll-ms", worker_args.poll_ms, "poll interval while idle (default 500)");
    worker->add_option("--heartbeat-secs", worker_args.heartbeat_secs,
                       "lease renewal interval (default 10)");

    std::string tok_vocab, tok_in, tok_out;
    auto* tokenize = app.add_subcommand(
        "tokenize", "greedy longest-match tokenization of a shard into a token shard");
    tokenize->add_option("--vocab", tok_vocab, "vocabulary file (<id>\\t<escaped-bytes>)")
        ->required();
    tokenize->add_option("--in", tok_in, "input shard (JSON lines)")->required();
    tokenize->add_option("--out", tok_out, "output token shard (binary)")->required();

    BenchRunArgs bench_args;
    auto add_bench_run_options = [&](CLI::App* cmd) {
        cmd->add_option("--prompts", bench_args.prompts, "prompt set (JSON array)")->required();
        cmd->add_option("--models", bench_args.models, "model adapter config (JSON)")->required();
        cmd->add_option("--judges", bench_args.judges, "judge adapter config (JSON)")->required();
        cmd->add_option("--transcript", bench_args.transcript,
                        "transcript output path (default bench_transcript.jsonl)");
        cmd->add_option("--report-out", bench_args.report_out, "also write the report JSON here");
        cmd->add_option("--temperature", bench_args.temperature,
                        "sampling temperature (default 1.0)");
        cmd->add_option("--top-p", bench_args.top_p, "nucleus sampling mass (default 0.3)");
        cmd->add_option("--max-tokens", bench_args.max_tokens,
                        "response token limit (default 80)");
        cmd->add_option("--seed", bench_args.seed, "generation seed (default 0)");
        cmd->add_option("--retries", bench_args.retries,
                        "attempts per generation/judge call (default 3)");
        cmd->add_option("--min-fill", bench_args.min_fill,
                        "required fraction of filled score cells (default 0.95)");
    };
    auto* bench_run = app.add_subcommand(
        "bench-run", "run the generation benchmark: prompts x models, judged per criterion");
    add_bench_run_options(bench_run);

    std::string replay_transcript_path, replay_report_out;
    auto add_bench_replay_options = [&](CLI::App* cmd) {
        cmd->add_option("--transcript", replay_transcript_path, "sealed transcript to replay")
            ->required();
        cmd->add_option("--report-out", replay_report_out, "also write the report JSON here");
    };
    auto* bench_replay = app.add_subcommand(
        "bench-replay", "recompute the benchmark report from a sealed transcript");
    add_bench_replay_options(bench_replay);

    std::string report_scores, report_baseline;
    auto add_report_options = [&](CLI::App* cmd) {
        cmd->add_option("--scores", report_scores,
                        "scores file (raw scores or per-judge means)")
            ->required();
        cmd->add_option("--relative-to", report_baseline,
                        "add a relative-change column against this model");
    };
    auto* report = app.add_subcommand(
        "report", "render the benchmark score table from a scores file");
    add_report_options(report);

    // `bench run|replay|report` spellings of the same commands
    auto* bench = app.add_subcommand("bench", "benchmark subcommands");
    bench->require_subcommand(1);
    auto* bench_run2 = bench->add_subcommand("run", "alias of bench-run");
    add_bench_run_options(bench_run2);
    auto* bench_replay2 = bench->add_subcommand("replay", "alias of bench-replay");
    add_bench_replay_options(bench_replay2);
    auto* bench_report2 = bench->add_subcommand("report", "alias of report");
    add_report_options(bench_report2);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (app.got_subcommand(filter)) return cmd_filter(filter_args, json_out);
        if (app.got_subcommand(train)) return cmd_train_classifier(train_args);
        if (app.got_subcommand(eval)) return cmd_eval_classifier(eval_model, eval_data, json_out);
        if (app.got_subcommand(coordinator)) return cmd_coordinator(coordinator_args);
        if (app.got_subcommand(worker)) return cmd_worker(worker_args);
        if (app.got_subcommand(tokenize)) return cmd_tokenize(tok_vocab, tok_in, tok_out);
        if (app.got_subcommand(bench_run) || bench_run2->parsed())
            return cmd_bench_run(bench_args, json_out);
        if (app.got_subcommand(bench_replay) || bench_replay2->parsed())
            return cmd_bench_replay(replay_transcript_path, replay_report_out, json_out);
        if (app.got_subcommand(report) || bench_report2->parsed())
            return cmd_report(report_scores, report_baseline, json_out);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s: %s\n", e.kind().c_str(), e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: internal: %s\n", e.what());
        return 1;
    }
    std::fprintf(stderr, "error: usage: no subcommand given\n");
    return 2;
}
