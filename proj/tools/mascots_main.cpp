#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mascots/artifact.hpp"
#include "mascots/borf.hpp"
#include "mascots/dataset.hpp"
#include "mascots/engine.hpp"
#include "mascots/errors.hpp"
#include "mascots/evaluation.hpp"
#include "mascots/models.hpp"
#include "mascots/rng.hpp"
#include "mascots/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct FitOptions {
    std::string data;
    int channels = 1;
    bool normalize = false;
    std::string blackbox = "knn1";
    double ridge = 1.0;
    int epochs = 300;
    double learning_rate = 0.01;
    std::uint64_t seed = 0;
    std::string out = "model.json";
};

struct ExplainOptions {
    std::string model;
    std::string data;
    int channels = 1;
    std::vector<int> indices;
    bool all = false;
    double lambda = 0.1;
    int max_iterations = 20;
    std::uint64_t seed = 0;
    std::string out = ".";
    int jobs = 0;
};

struct EvaluateOptions {
    std::vector<std::string> explanations;
    std::string model;
    std::string train;
    int channels = 1;
    int trees = 100;
    int subsample = 256;
    double threshold = 0.5;
    std::uint64_t seed = 0;
    std::string out;
};

struct RenderOptions {
    std::string explanation;
    std::string model;
    std::string out;
    std::string plot;
};

struct SynthOptions {
    int count = 90;
    int length = 128;
    std::uint64_t seed = 0;
    std::string out;
};

void run_fit(const FitOptions& opt) {
    mascots::Dataset train = mascots::load_dataset(opt.data, opt.channels);
    if (opt.normalize) mascots::normalize_per_channel(train);

    const auto configs = mascots::auto_configure(train.channels(), train.length());
    auto transform = mascots::BorfTransform::build(configs, train.channels());

    std::unique_ptr<mascots::BlackBox> blackbox;
    if (opt.blackbox == "knn1") {
        blackbox = std::make_unique<mascots::Knn1BlackBox>(mascots::Knn1BlackBox::fit(train));
    } else {
        blackbox = std::make_unique<mascots::RidgeBorfBlackBox>(
            mascots::RidgeBorfBlackBox::fit(train, transform, opt.ridge));
    }

    const mascots::BorfMatrix counts = mascots::transform_dataset(train, transform);
    std::vector<std::vector<double>> targets;
    targets.reserve(train.instances.size());
    for (const auto& ts : train.instances) targets.push_back(blackbox->predict_proba(ts));
    const std::vector<int> blackbox_labels = blackbox->predict_batch(train.instances);

    mascots::SurrogateFitOptions fit_options;
    fit_options.epochs = opt.epochs;
    fit_options.learning_rate = opt.learning_rate;
    fit_options.seed = opt.seed;
    mascots::Surrogate surrogate = mascots::surrogate_fit(counts, targets, fit_options);

    mascots::ModelArtifact artifact;
    artifact.transform = std::move(transform);
    artifact.surrogate = std::move(surrogate);
    artifact.vocab_presence = mascots::column_presence(counts);
    artifact.blackbox = std::move(blackbox);
    artifact.class_names = train.class_names;
    artifact.normalized = opt.normalize;
    artifact.fidelity =
        mascots::surrogate_fidelity(artifact.surrogate, counts, blackbox_labels);
    artifact.run_config = {{"command", "fit"},          {"data", opt.data},
                           {"channels", opt.channels},  {"normalize", opt.normalize},
                           {"blackbox", opt.blackbox},  {"ridge", opt.ridge},
                           {"epochs", opt.epochs},      {"learning_rate", opt.learning_rate},
                           {"seed", opt.seed}};
    artifact.save(opt.out);

    std::cout << "surrogate fidelity " << artifact.fidelity << " on " << train.size()
              << " training instances (" << artifact.transform.vocab_size << " patterns, "
              << configs.size() << " configurations)\n";
    std::cout << "model written to " << opt.out << '\n';
}

void run_explain(const ExplainOptions& opt) {
    mascots::ModelArtifact artifact = mascots::ModelArtifact::load(opt.model);
    mascots::Dataset data = mascots::load_dataset(opt.data, opt.channels);
    if (artifact.normalized) mascots::normalize_per_channel(data);

    std::vector<int> indices = opt.indices;
    if (opt.all) {
        indices.resize(data.size());
        for (int i = 0; i < data.size(); ++i) indices[i] = i;
    }
    if (indices.empty()) {
        throw mascots::ConfigError("nothing to explain: pass --index or --all");
    }
    for (int idx : indices) {
        if (idx < 0 || idx >= data.size()) {
            throw mascots::IndexOutOfRange("index " + std::to_string(idx) + " outside [0, " +
                                           std::to_string(data.size()) + ")");
        }
    }

    const json run_config = {{"command", "explain"}, {"model", opt.model},
                             {"data", opt.data},     {"channels", opt.channels},
                             {"lambda", opt.lambda}, {"max_iterations", opt.max_iterations},
                             {"seed", opt.seed}};
    fs::create_directories(opt.out);

    const int n = static_cast<int>(indices.size());
    std::vector<mascots::CounterfactualResult> results(n);
#ifdef _OPENMP
    const int threads = opt.jobs > 0 ? opt.jobs : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
#endif
    for (int i = 0; i < n; ++i) {
        mascots::EngineConfig config;
        config.lambda = opt.lambda;
        config.max_iterations = opt.max_iterations;
        // one stream per dataset index, so a subset run reproduces --all
        config.seed = mascots::mix_seed(opt.seed, static_cast<std::uint64_t>(indices[i]));
        results[i] = mascots::explain(data.instances[indices[i]], *artifact.blackbox,
                                      artifact.surrogate, artifact.transform,
                                      artifact.vocab_presence, config);
    }

    int valid = 0;
    for (int i = 0; i < n; ++i) {
        json doc = mascots::result_to_json(results[i]);
        doc["instance_index"] = indices[i];
        doc["class_names"] = artifact.class_names;
        doc["run_config"] = run_config;
        const fs::path path =
            fs::path(opt.out) / ("explanation-" + std::to_string(indices[i]) + ".json");
        mascots::write_json_atomic(doc, path.string());

        const double sparsity =
            mascots::instance_sparsity(results[i].original, results[i].counterfactual);
        std::cout << "instance " << indices[i] << ": valid=" << (results[i].valid ? "yes" : "no")
                  << " iterations=" << results[i].iterations << " sparsity=" << sparsity;
        if (!results[i].note.empty()) std::cout << " note=\"" << results[i].note << '"';
        std::cout << '\n';
        if (results[i].valid) ++valid;
    }
    std::cout << "valid " << valid << "/" << n << ", explanations written to " << opt.out << '\n';
}

std::vector<std::string> collect_explanation_files(const std::vector<std::string>& inputs) {
    std::vector<std::string> files;
    for (const auto& input : inputs) {
        if (fs::is_directory(input)) {
            for (const auto& entry : fs::directory_iterator(input)) {
                if (entry.path().extension() == ".json" &&
                    entry.path().filename().string().rfind("explanation-", 0) == 0) {
                    files.push_back(entry.path().string());
                }
            }
        } else {
            files.push_back(input);
        }
    }
    std::sort(files.begin(), files.end());
    return files;
}

void run_evaluate(const EvaluateOptions& opt) {
    mascots::ModelArtifact artifact = mascots::ModelArtifact::load(opt.model);
    mascots::Dataset train = mascots::load_dataset(opt.train, opt.channels);
    if (artifact.normalized) mascots::normalize_per_channel(train);

    const auto files = collect_explanation_files(opt.explanations);
    if (files.empty()) throw mascots::EmptyDataset("no explanation files found");
    std::vector<mascots::CounterfactualResult> results;
    results.reserve(files.size());
    for (const auto& file : files) {
        std::ifstream in(file);
        if (!in) throw mascots::ParseError("cannot open '" + file + "'");
        json doc;
        try {
            in >> doc;
        } catch (const json::exception& e) {
            throw mascots::ParseError("'" + file + "': " + e.what());
        }
        results.push_back(mascots::result_from_json(doc));
    }

    mascots::IsolationForest forest =
        mascots::iforest_fit(train, opt.trees, opt.subsample, opt.seed);
    forest.threshold = opt.threshold;
    const mascots::MetricsReport report =
        mascots::evaluate_run(results, *artifact.blackbox, forest);

    std::cout << report.to_table();
    if (!opt.out.empty()) {
        json doc = report.to_json();
        doc["run_config"] = {{"command", "evaluate"},   {"model", opt.model},
                             {"train", opt.train},      {"channels", opt.channels},
                             {"trees", opt.trees},      {"subsample", opt.subsample},
                             {"threshold", opt.threshold}, {"seed", opt.seed},
                             {"explanations", files}};
        mascots::write_json_atomic(doc, opt.out);
        std::cout << "metrics written to " << opt.out << '\n';
    }
}

void run_render(const RenderOptions& opt) {
    std::ifstream in(opt.explanation);
    if (!in) throw mascots::ParseError("cannot open '" + opt.explanation + "'");
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw mascots::ParseError("'" + opt.explanation + "': " + e.what());
    }
    const mascots::CounterfactualResult result = mascots::result_from_json(doc);

    std::vector<std::string> class_names;
    if (!opt.model.empty()) {
        class_names = mascots::ModelArtifact::load(opt.model).class_names;
    } else if (doc.contains("class_names")) {
        class_names = doc["class_names"].get<std::vector<std::string>>();
    }

    const std::string text = mascots::render_text(result, class_names);
    if (opt.out.empty()) {
        std::cout << text << '\n';
    } else {
        std::ofstream out(opt.out);
        if (!out) throw mascots::ParseError("cannot write '" + opt.out + "'");
        out << text << '\n';
        std::cout << "text written to " << opt.out << '\n';
    }
    if (!opt.plot.empty()) {
        mascots::write_json_atomic(mascots::render_plot_json(result), opt.plot);
        std::cout << "plot data written to " << opt.plot << '\n';
    }
}

void run_synth(const SynthOptions& opt) {
    const mascots::Dataset data = mascots::make_cbf(opt.count, opt.length, opt.seed);
    mascots::save_dataset_json(data, opt.out);
    std::cout << "wrote " << data.size() << " cylinder/bell/funnel instances of length "
              << opt.length << " to " << opt.out << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Counterfactual explanations for time-series classifiers via symbolic pattern swaps"};
    app.require_subcommand(1);
    app.set_config("--config", "", "INI file with per-subcommand option defaults; explicit flags win");
    bool json_errors = false;
    app.add_flag("--json-errors", json_errors, "report errors as a JSON object on stderr");

    FitOptions fit;
    auto* cmd_fit = app.add_subcommand("fit", "fit a black-box, the symbolic transform, and the surrogate");
    cmd_fit->add_option("--data", fit.data, "training dataset (.ts/.csv/.json)")->required();
    cmd_fit->add_option("--channels", fit.channels, "channel count for CSV input");
    cmd_fit->add_flag("--normalize", fit.normalize, "z-normalize each channel before fitting");
    cmd_fit->add_option("--blackbox", fit.blackbox, "black-box kind")
        ->check(CLI::IsMember({"knn1", "ridge-borf"}));
    cmd_fit->add_option("--ridge", fit.ridge, "ridge penalty (ridge-borf only)");
    cmd_fit->add_option("--epochs", fit.epochs, "surrogate training epochs");
    cmd_fit->add_option("--learning-rate", fit.learning_rate, "surrogate learning rate");
    cmd_fit->add_option("--seed", fit.seed, "random seed");
    cmd_fit->add_option("--out", fit.out, "model artifact path");
    cmd_fit->callback([&fit] { run_fit(fit); });

    ExplainOptions explain;
    auto* cmd_explain = app.add_subcommand("explain", "search counterfactuals for test instances");
    cmd_explain->add_option("--model", explain.model, "model artifact from fit")->required();
    cmd_explain->add_option("--data", explain.data, "dataset holding the instances")->required();
    cmd_explain->add_option("--channels", explain.channels, "channel count for CSV input");
    cmd_explain->add_option("--index", explain.indices, "instance indices to explain");
    cmd_explain->add_flag("--all", explain.all, "explain every instance");
    cmd_explain->add_option("--lambda", explain.lambda, "symbol-distance weight in the swap objective");
    cmd_explain->add_option("--max-iters", explain.max_iterations, "iteration budget per instance");
    cmd_explain->add_option("--seed", explain.seed, "base seed; instance i uses a stream derived from (seed, i)");
    cmd_explain->add_option("--out", explain.out, "output directory");
    cmd_explain->add_option("--jobs", explain.jobs, "parallel explanation workers (0 = all cores)");
    cmd_explain->callback([&explain] { run_explain(explain); });

    EvaluateOptions evaluate;
    auto* cmd_evaluate = app.add_subcommand("evaluate", "score explanation files");
    cmd_evaluate->add_option("--explanations", evaluate.explanations,
                             "explanation files or directories of explanation-*.json")
        ->required();
    cmd_evaluate->add_option("--model", evaluate.model, "model artifact from fit")->required();
    cmd_evaluate->add_option("--train", evaluate.train, "training dataset for the plausibility forest")
        ->required();
    cmd_evaluate->add_option("--channels", evaluate.channels, "channel count for CSV input");
    cmd_evaluate->add_option("--trees", evaluate.trees, "isolation-forest size");
    cmd_evaluate->add_option("--subsample", evaluate.subsample, "isolation-forest subsample");
    cmd_evaluate->add_option("--threshold", evaluate.threshold, "anomaly-score cutoff");
    cmd_evaluate->add_option("--seed", evaluate.seed, "forest seed");
    cmd_evaluate->add_option("--out", evaluate.out, "metrics JSON path");
    cmd_evaluate->callback([&evaluate] { run_evaluate(evaluate); });

    RenderOptions render;
    auto* cmd_render = app.add_subcommand("render", "turn an explanation into text and plot data");
    cmd_render->add_option("--explanation", render.explanation, "explanation JSON from explain")
        ->required();
    cmd_render->add_option("--model", render.model, "model artifact (for class names)");
    cmd_render->add_option("--out", render.out, "text output path (default: stdout)");
    cmd_render->add_option("--plot", render.plot, "plot-data JSON path");
    cmd_render->callback([&render] { run_render(render); });

    SynthOptions synth;
    auto* cmd_synth = app.add_subcommand("synth", "generate a cylinder/bell/funnel dataset");
    cmd_synth->add_option("--n", synth.count, "instance count");
    cmd_synth->add_option("--length", synth.length, "series length");
    cmd_synth->add_option("--seed", synth.seed, "generator seed");
    cmd_synth->add_option("--out", synth.out, "dataset JSON path")->required();
    cmd_synth->callback([&synth] { run_synth(synth); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const mascots::Error& e) {
        if (json_errors) {
            std::cerr << json{{"error", e.code()},
                              {"kind", e.kind() == mascots::ErrorKind::Input ? "input" : "internal"},
                              {"message", e.what()}}
                             .dump()
                      << '\n';
        } else {
            std::cerr << "error: " << e.what() << " [" << e.code() << "]\n";
        }
        return e.kind() == mascots::ErrorKind::Input ? 2 : 3;
    } catch (const std::exception& e) {
        if (json_errors) {
            std::cerr << json{{"error", "Unexpected"}, {"kind", "internal"}, {"message", e.what()}}
                             .dump()
                      << '\n';
        } else {
            std::cerr << "error: " << e.what() << '\n';
        }
        return 3;
    }
    return 0;
}
