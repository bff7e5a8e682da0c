// qclus: command-line front end for the clustering pipeline.
//
// Subcommands: synth, build, train, eval, cluster, baseline. Every output
// file gets a sibling <output>.manifest recording the resolved configuration
// and FNV-1a hashes of all artifacts involved; `qclus --config <manifest>`
// re-runs the command with the same settings (explicit flags still win).

#include <CLI11.hpp>

#include <qclus/clusterset.hpp>
#include <qclus/datagen.hpp>
#include <qclus/errors.hpp>
#include <qclus/io.hpp>
#include <qclus/metrics.hpp>
#include <qclus/trainer.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace {

std::string fmt_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string fmt_hash(std::uint64_t h) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

// One key=value pair in a manifest's config section.
struct KV {
    std::string key;
    std::string value;
};

void write_manifest(const std::string& output_path, const std::string& command,
                    const std::vector<KV>& config,
                    const std::vector<std::pair<std::string, std::string>>& files) {
    std::string text;
    text += "[" + command + "]\n";
    text += "command=" + command + "\n";
    for (const KV& kv : config) {
        text += kv.key + "=" + kv.value + "\n";
    }
    for (const auto& [name, path] : files) {
        text += "hash." + name + "=" + fmt_hash(qclus::hash_file(path)) + "\n";
    }
    qclus::write_text_atomic(output_path + ".manifest", text);
}

std::string escape_msg(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (c == '"') {
            out += '\'';
        } else if (c == '\n') {
            out += "; ";
        } else {
            out += c;
        }
    }
    return out;
}

const char* error_kind(const qclus::error& e) {
    if (dynamic_cast<const qclus::contract_error*>(&e)) return "contract";
    if (dynamic_cast<const qclus::config_error*>(&e)) return "config";
    if (dynamic_cast<const qclus::format_error*>(&e)) return "format";
    if (dynamic_cast<const qclus::index_error*>(&e)) return "index";
    if (dynamic_cast<const qclus::degenerate_input_error*>(&e)) return "degenerate_input";
    if (dynamic_cast<const qclus::numeric_error*>(&e)) return "numeric";
    if (dynamic_cast<const qclus::unsupported_error*>(&e)) return "unsupported";
    return "error";
}

qclus::FeatureSet load_features(const std::string& features_path,
                                const std::string& labels_path) {
    qclus::FeatureSet f = qclus::read_features(features_path);
    if (!labels_path.empty()) {
        auto labels = qclus::read_labels(labels_path);
        if (labels.size() != f.size()) {
            throw qclus::contract_error("label file has " + std::to_string(labels.size()) +
                                        " entries for " + std::to_string(f.size()) +
                                        " samples");
        }
        f.labels = std::move(labels);
    }
    return f;
}

void print_report(const qclus::MetricReport& r, const std::string& prefix,
                  std::string& out) {
    const auto& p = r.pairwise;
    const auto& b = r.bcubed;
    out += prefix + "pairwise_precision=" + fmt_double(p.precision) + "\n";
    out += prefix + "pairwise_recall=" + fmt_double(p.recall) + "\n";
    out += prefix + "pairwise_f=" + fmt_double(p.f) + "\n";
    out += prefix + "bcubed_precision=" + fmt_double(b.precision) + "\n";
    out += prefix + "bcubed_recall=" + fmt_double(b.recall) + "\n";
    out += prefix + "bcubed_f=" + fmt_double(b.f) + "\n";
}

std::string human_report(const qclus::MetricReport& r, const std::string& name) {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "%-10s pairwise P=%.4f R=%.4f F=%.4f | bcubed P=%.4f R=%.4f F=%.4f",
                  name.c_str(), r.pairwise.precision, r.pairwise.recall, r.pairwise.f,
                  r.bcubed.precision, r.bcubed.recall, r.bcubed.f);
    return std::string(buf);
}

std::size_t distinct_count(const qclus::LabelVector& labels) {
    std::unordered_set<std::uint32_t> seen(labels.begin(), labels.end());
    return seen.size();
}

// ---- synth ---------------------------------------------------------------------

struct SynthArgs {
    std::size_t classes = 0;
    std::size_t per_class = 0;
    std::size_t dim = 0;
    double sigma = 0.1;
    double min_sep = 0.5;
    std::uint64_t seed = 0;
    std::string out_features;
    std::string out_labels;
};

void run_synth(const SynthArgs& a) {
    qclus::SynthSpec spec;
    spec.n_classes = a.classes;
    spec.samples_per_class = a.per_class;
    spec.dim = a.dim;
    spec.sigma = a.sigma;
    spec.min_sep = a.min_sep;
    spec.seed = a.seed;
    qclus::FeatureSet f = qclus::synth_blobs(spec);
    qclus::write_features(a.out_features, f);
    qclus::write_labels(a.out_labels, *f.labels);

    const std::vector<KV> config = {
        {"classes", std::to_string(a.classes)},
        {"per-class", std::to_string(a.per_class)},
        {"dim", std::to_string(a.dim)},
        {"sigma", fmt_double(a.sigma)},
        {"min-sep", fmt_double(a.min_sep)},
        {"seed", std::to_string(a.seed)},
        {"out-features", a.out_features},
        {"out-labels", a.out_labels},
    };
    const std::vector<std::pair<std::string, std::string>> files = {
        {"out-features", a.out_features},
        {"out-labels", a.out_labels},
    };
    write_manifest(a.out_features, "synth", config, files);
    write_manifest(a.out_labels, "synth", config, files);
    std::printf("samples=%zu dim=%zu classes=%zu features=%s labels=%s\n", f.size(),
                f.dim(), a.classes, a.out_features.c_str(), a.out_labels.c_str());
}

// ---- build ---------------------------------------------------------------------

struct BuildArgs {
    std::string features;
    std::string labels;
    std::size_t k = 0;
    std::size_t threads = 0;
    std::string out;
};

void run_build(const BuildArgs& a) {
    qclus::FeatureSet f = load_features(a.features, a.labels);
    auto clusters = qclus::knn_clusters(f, a.k, a.threads);
    qclus::write_clusters(a.out, clusters);

    std::vector<KV> config = {
        {"features", a.features},
        {"k", std::to_string(a.k)},
        {"threads", std::to_string(a.threads)},
        {"out", a.out},
    };
    std::vector<std::pair<std::string, std::string>> files = {
        {"features", a.features},
        {"out", a.out},
    };
    if (!a.labels.empty()) {
        config.insert(config.begin() + 1, {"labels", a.labels});
        files.insert(files.begin() + 1, {"labels", a.labels});
    }
    write_manifest(a.out, "build", config, files);
    std::printf("instances=%zu k=%zu masks=%d out=%s\n", clusters.size(), a.k,
                clusters.front().mask.empty() ? 0 : 1, a.out.c_str());
}

// ---- train ---------------------------------------------------------------------

struct TrainArgs {
    std::string features;
    std::string clusters;
    std::string out;
    std::string log;
    std::string resume;
    std::size_t n_qubits = 4;
    std::size_t depth = 2;
    std::size_t blocks = 1;
    std::string sharing = "1QKV";
    std::string fusion = "per-position";
    double lr = 0.05;
    std::size_t epochs = 12;
    std::size_t batch = 8;
    std::uint64_t seed = 0;
    double tau = 0.5;
    double pos_weight = 1.0;
    std::size_t threads = 0;
    bool epochs_given = false;
};

void run_train(const TrainArgs& a) {
    qclus::ClusterDataset data{qclus::read_features(a.features),
                               qclus::read_clusters(a.clusters)};

    std::ofstream log_stream;
    if (!a.log.empty()) {
        log_stream.open(a.log, std::ios::trunc);
        if (!log_stream) {
            throw qclus::format_error("cannot open log file " + a.log);
        }
    }
    auto emit = [&](const std::string& line) {
        std::fputs(line.c_str(), stdout);
        std::fputc('\n', stdout);
        if (log_stream.is_open()) {
            log_stream << line << '\n';
            log_stream.flush();
        }
    };

    qclus::TrainHooks hooks;
    hooks.on_batch = [&](std::size_t epoch, std::size_t batch, double loss, double lr) {
        emit("epoch=" + std::to_string(epoch) + " batch=" + std::to_string(batch) +
             " loss=" + fmt_double(loss) + " lr=" + fmt_double(lr));
    };
    hooks.on_epoch = [&](const qclus::Checkpoint& ck, double mean_loss, double lr) {
        qclus::write_checkpoint(a.out, ck);
        emit("epoch=" + std::to_string(ck.epoch - 1) + " mean_loss=" +
             fmt_double(mean_loss) + " lr=" + fmt_double(lr) + " checkpoint=" + a.out);
    };

    qclus::TrainResult result;
    qclus::TrainConfig cfg;
    if (!a.resume.empty()) {
        qclus::Checkpoint start = qclus::read_checkpoint(a.resume);
        if (a.epochs_given) {
            start.config.epochs = a.epochs;
        }
        cfg = start.config;
        result = qclus::train_from(std::move(start), data, hooks, a.threads);
    } else {
        cfg.k = data.k();
        cfg.n_qubits = a.n_qubits;
        cfg.depth = a.depth;
        cfg.blocks = a.blocks;
        cfg.sharing = qclus::sharing_mode_from_string(a.sharing);
        cfg.fusion = qclus::fusion_mode_from_string(a.fusion);
        cfg.lr = a.lr;
        cfg.epochs = a.epochs;
        cfg.batch_size = a.batch;
        cfg.seed = a.seed;
        cfg.tau = a.tau;
        cfg.pos_weight = a.pos_weight;
        result = qclus::train(cfg, data, hooks, a.threads);
    }

    // The per-epoch hook already wrote the last good checkpoint, except when
    // training aborted before completing its first epoch.
    qclus::write_checkpoint(a.out, result.checkpoint);

    const std::vector<KV> config = {
        {"features", a.features},
        {"clusters", a.clusters},
        {"k", std::to_string(cfg.k)},
        {"n-qubits", std::to_string(cfg.n_qubits)},
        {"depth", std::to_string(cfg.depth)},
        {"blocks", std::to_string(cfg.blocks)},
        {"sharing-mode", qclus::to_string(cfg.sharing)},
        {"fusion-mode", qclus::to_string(cfg.fusion)},
        {"lr", fmt_double(cfg.lr)},
        {"epochs", std::to_string(cfg.epochs)},
        {"batch", std::to_string(cfg.batch_size)},
        {"seed", std::to_string(cfg.seed)},
        {"tau", fmt_double(cfg.tau)},
        {"pos-weight", fmt_double(cfg.pos_weight)},
        {"threads", std::to_string(a.threads)},
        {"out", a.out},
    };
    const std::vector<std::pair<std::string, std::string>> files = {
        {"features", a.features},
        {"clusters", a.clusters},
        {"out", a.out},
    };
    write_manifest(a.out, "train", config, files);

    if (result.aborted) {
        throw qclus::numeric_error("training aborted at epoch " +
                                   std::to_string(result.checkpoint.epoch) + ": " +
                                   result.abort_reason +
                                   " (last good checkpoint kept at " + a.out + ")");
    }
    std::printf("trained_epochs=%zu final_loss=%s checkpoint=%s\n",
                result.checkpoint.epoch,
                result.epoch_losses.empty()
                    ? "nan"
                    : fmt_double(result.epoch_losses.back()).c_str(),
                a.out.c_str());
}

// ---- eval ----------------------------------------------------------------------

struct EvalArgs {
    std::string features;
    std::string labels;
    std::string clusters;
    std::string checkpoint;
    double tau = 0.5;
    bool tau_given = false;
    std::string sharing;
    std::string fusion;
    std::size_t threads = 0;
    std::string out;
};

void run_eval(const EvalArgs& a) {
    qclus::ClusterDataset data{load_features(a.features, a.labels),
                               qclus::read_clusters(a.clusters)};
    qclus::Checkpoint ck = qclus::read_checkpoint(a.checkpoint);
    if (a.tau_given) {
        ck.config.tau = a.tau;
    }
    if (!a.sharing.empty()) {
        ck.config.sharing = qclus::sharing_mode_from_string(a.sharing);
    }
    if (!a.fusion.empty()) {
        ck.config.fusion = qclus::fusion_mode_from_string(a.fusion);
    }
    qclus::EvalResult ev = qclus::evaluate(ck, data, a.threads);

    std::string text;
    print_report(ev.report, "", text);
    text += "predicted_clusters=" + std::to_string(distinct_count(ev.predicted)) + "\n";
    text += "tau=" + fmt_double(ck.config.tau) + "\n";
    std::fputs(text.c_str(), stdout);
    std::puts(human_report(ev.report, "model").c_str());

    if (!a.out.empty()) {
        qclus::write_text_atomic(a.out, text);
        const std::vector<KV> config = {
            {"features", a.features},
            {"labels", a.labels},
            {"clusters", a.clusters},
            {"checkpoint", a.checkpoint},
            {"tau", fmt_double(ck.config.tau)},
            {"sharing-mode", qclus::to_string(ck.config.sharing)},
            {"fusion-mode", qclus::to_string(ck.config.fusion)},
            {"threads", std::to_string(a.threads)},
            {"out", a.out},
        };
        const std::vector<std::pair<std::string, std::string>> files = {
            {"features", a.features},
            {"labels", a.labels},
            {"clusters", a.clusters},
            {"checkpoint", a.checkpoint},
            {"out", a.out},
        };
        write_manifest(a.out, "eval", config, files);
    }
}

// ---- cluster -------------------------------------------------------------------

struct ClusterArgs {
    std::string features;
    std::string clusters;
    std::string checkpoint;
    double tau = 0.5;
    bool tau_given = false;
    std::size_t threads = 0;
    std::string out;
};

void run_cluster(const ClusterArgs& a) {
    qclus::ClusterDataset data{qclus::read_features(a.features),
                               qclus::read_clusters(a.clusters)};
    qclus::Checkpoint ck = qclus::read_checkpoint(a.checkpoint);
    if (a.tau_given) {
        ck.config.tau = a.tau;
    }
    auto preds = qclus::predict_all(ck, data, a.threads);
    qclus::LabelVector labels = qclus::prune_and_link(data.clusters, preds, ck.config.tau);
    qclus::write_labels(a.out, labels);

    const std::vector<KV> config = {
        {"features", a.features},
        {"clusters", a.clusters},
        {"checkpoint", a.checkpoint},
        {"tau", fmt_double(ck.config.tau)},
        {"threads", std::to_string(a.threads)},
        {"out", a.out},
    };
    const std::vector<std::pair<std::string, std::string>> files = {
        {"features", a.features},
        {"clusters", a.clusters},
        {"checkpoint", a.checkpoint},
        {"out", a.out},
    };
    write_manifest(a.out, "cluster", config, files);
    std::printf("samples=%zu clusters=%zu out=%s\n", labels.size(),
                distinct_count(labels), a.out.c_str());
}

// ---- baseline ------------------------------------------------------------------

struct BaselineArgs {
    std::string features;
    std::string labels;
    std::string clusters;
    std::size_t n_clusters = 0;  // 0 means "number of distinct labels"
    std::uint64_t seed = 0;
    std::string out;
};

void run_baseline(const BaselineArgs& a) {
    qclus::FeatureSet f = load_features(a.features, a.labels);
    auto clusters = qclus::read_clusters(a.clusters);

    const std::size_t n_clusters =
        a.n_clusters == 0 ? distinct_count(*f.labels) : a.n_clusters;
    qclus::LabelVector km = qclus::kmeans_baseline(f, n_clusters, a.seed);
    qclus::MetricReport km_report = qclus::evaluate_labels(*f.labels, km);

    // All-keep linking: every proposal edge survives, tau is irrelevant.
    std::vector<std::vector<double>> ones(clusters.size());
    for (std::size_t i = 0; i < clusters.size(); ++i) {
        ones[i].assign(clusters[i].members.size(), 1.0);
    }
    qclus::LabelVector knn_labels = qclus::prune_and_link(clusters, ones, 0.5);
    qclus::MetricReport knn_report = qclus::evaluate_labels(*f.labels, knn_labels);

    std::string text;
    print_report(km_report, "kmeans_", text);
    text += "kmeans_clusters=" + std::to_string(distinct_count(km)) + "\n";
    text += "kmeans_n_clusters=" + std::to_string(n_clusters) + "\n";
    print_report(knn_report, "knn_", text);
    text += "knn_clusters=" + std::to_string(distinct_count(knn_labels)) + "\n";
    std::fputs(text.c_str(), stdout);
    std::puts(human_report(km_report, "kmeans").c_str());
    std::puts(human_report(knn_report, "knn-keep").c_str());

    if (!a.out.empty()) {
        qclus::write_text_atomic(a.out, text);
        const std::vector<KV> config = {
            {"features", a.features},
            {"labels", a.labels},
            {"clusters", a.clusters},
            {"n-clusters", std::to_string(a.n_clusters)},
            {"seed", std::to_string(a.seed)},
            {"out", a.out},
        };
        const std::vector<std::pair<std::string, std::string>> files = {
            {"features", a.features},
            {"labels", a.labels},
            {"clusters", a.clusters},
            {"out", a.out},
        };
        write_manifest(a.out, "baseline", config, files);
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"cluster refinement with quantum-circuit attention"};
    app.require_subcommand(1);
    app.set_config("--config", "", "read options from a key=value file or a run manifest");
    app.allow_config_extras(true);

    const std::vector<std::string> sharing_names = {"1QKV", "1QK-1V", "1Q-1K-1V"};
    const std::vector<std::string> fusion_names = {"per-position", "shared"};

    SynthArgs synth;
    CLI::App* synth_cmd =
        app.add_subcommand("synth", "generate a synthetic hypersphere-blob dataset");
    synth_cmd->configurable();
    synth_cmd->add_option("--classes", synth.classes, "number of classes")->required();
    synth_cmd->add_option("--per-class", synth.per_class, "samples per class")->required();
    synth_cmd->add_option("--dim", synth.dim, "feature dimension (>= 2)")->required();
    synth_cmd->add_option("--sigma", synth.sigma, "angular noise scale, radians");
    synth_cmd->add_option("--min-sep", synth.min_sep,
                          "minimum centroid separation, radians");
    synth_cmd->add_option("--seed", synth.seed, "RNG seed");
    synth_cmd->add_option("--out-features", synth.out_features, "output feature file")
        ->required();
    synth_cmd->add_option("--out-labels", synth.out_labels, "output label file")
        ->required();

    BuildArgs build;
    CLI::App* build_cmd =
        app.add_subcommand("build", "build k-nearest-neighbor cluster proposals");
    build_cmd->configurable();
    build_cmd->add_option("--features", build.features, "input feature file")->required();
    build_cmd->add_option("--labels", build.labels,
                          "optional label file; adds ground-truth masks");
    build_cmd->add_option("--k", build.k, "neighbors per cluster (center included)")
        ->required();
    build_cmd->add_option("--threads", build.threads, "worker cap (0 = all cores)");
    build_cmd->add_option("--out", build.out, "output cluster file")->required();

    TrainArgs train;
    CLI::App* train_cmd = app.add_subcommand("train", "train the attention encoder");
    train_cmd->configurable();
    train_cmd->add_option("--features", train.features, "input feature file")->required();
    train_cmd->add_option("--clusters", train.clusters,
                          "cluster file with ground-truth masks")
        ->required();
    train_cmd->add_option("--out", train.out, "checkpoint path, rewritten every epoch")
        ->required();
    train_cmd->add_option("--log", train.log, "also append progress lines to this file");
    train_cmd->add_option("--resume", train.resume,
                          "continue from this checkpoint (config flags besides --epochs "
                          "are ignored)");
    train_cmd->add_option("--n-qubits", train.n_qubits, "qubits per circuit");
    train_cmd->add_option("--depth", train.depth, "ansatz layers");
    train_cmd->add_option("--blocks", train.blocks, "encoder blocks");
    train_cmd->add_option("--sharing-mode", train.sharing, "Q/K/V parameter sharing")
        ->check(CLI::IsMember(sharing_names));
    train_cmd->add_option("--fusion-mode", train.fusion, "token fusion mode")
        ->check(CLI::IsMember(fusion_names));
    train_cmd->add_option("--lr", train.lr, "peak learning rate");
    CLI::Option* epochs_opt = train_cmd->add_option("--epochs", train.epochs, "epochs");
    train_cmd->add_option("--batch", train.batch, "batch size");
    train_cmd->add_option("--seed", train.seed, "RNG seed");
    train_cmd->add_option("--tau", train.tau, "link threshold stored in the checkpoint");
    train_cmd->add_option("--pos-weight", train.pos_weight, "positive-class loss weight");
    train_cmd->add_option("--threads", train.threads, "worker cap (0 = all cores)");

    EvalArgs eval;
    CLI::App* eval_cmd =
        app.add_subcommand("eval", "score a checkpoint against ground truth");
    eval_cmd->configurable();
    eval_cmd->add_option("--features", eval.features, "input feature file")->required();
    eval_cmd->add_option("--labels", eval.labels, "ground-truth label file")->required();
    eval_cmd->add_option("--clusters", eval.clusters, "cluster file")->required();
    eval_cmd->add_option("--checkpoint", eval.checkpoint, "trained checkpoint")
        ->required();
    CLI::Option* eval_tau = eval_cmd->add_option("--tau", eval.tau,
                                                 "override the checkpoint's threshold");
    eval_cmd->add_option("--sharing-mode", eval.sharing,
                         "override the checkpoint's sharing mode")
        ->check(CLI::IsMember(sharing_names));
    eval_cmd->add_option("--fusion-mode", eval.fusion,
                         "override the checkpoint's fusion mode")
        ->check(CLI::IsMember(fusion_names));
    eval_cmd->add_option("--threads", eval.threads, "worker cap (0 = all cores)");
    eval_cmd->add_option("--out", eval.out, "also write the key=value report here");

    ClusterArgs cluster;
    CLI::App* cluster_cmd =
        app.add_subcommand("cluster", "predict pruned cluster labels");
    cluster_cmd->configurable();
    cluster_cmd->add_option("--features", cluster.features, "input feature file")
        ->required();
    cluster_cmd->add_option("--clusters", cluster.clusters, "cluster file")->required();
    cluster_cmd->add_option("--checkpoint", cluster.checkpoint, "trained checkpoint")
        ->required();
    CLI::Option* cluster_tau = cluster_cmd->add_option(
        "--tau", cluster.tau, "override the checkpoint's threshold");
    cluster_cmd->add_option("--threads", cluster.threads, "worker cap (0 = all cores)");
    cluster_cmd->add_option("--out", cluster.out, "output label file")->required();

    BaselineArgs baseline;
    CLI::App* baseline_cmd = app.add_subcommand(
        "baseline", "score k-means and all-keep linking on the same data");
    baseline_cmd->configurable();
    baseline_cmd->add_option("--features", baseline.features, "input feature file")
        ->required();
    baseline_cmd->add_option("--labels", baseline.labels, "ground-truth label file")
        ->required();
    baseline_cmd->add_option("--clusters", baseline.clusters, "cluster file")->required();
    baseline_cmd->add_option("--n-clusters", baseline.n_clusters,
                             "k-means cluster count (0 = distinct label count)");
    baseline_cmd->add_option("--seed", baseline.seed, "k-means seed");
    baseline_cmd->add_option("--out", baseline.out,
                             "also write the key=value report here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            return app.exit(e);  // --help and friends
        }
        std::fprintf(stderr, "error kind=usage msg=\"%s\"\n",
                     escape_msg(e.what()).c_str());
        return 2;
    }

    train.epochs_given = epochs_opt->count() > 0;
    eval.tau_given = eval_tau->count() > 0;
    cluster.tau_given = cluster_tau->count() > 0;

    try {
        if (*synth_cmd) run_synth(synth);
        if (*build_cmd) run_build(build);
        if (*train_cmd) run_train(train);
        if (*eval_cmd) run_eval(eval);
        if (*cluster_cmd) run_cluster(cluster);
        if (*baseline_cmd) run_baseline(baseline);
    } catch (const qclus::error& e) {
        std::fprintf(stderr, "error kind=%s msg=\"%s\"\n", error_kind(e),
                     escape_msg(e.what()).c_str());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error kind=internal msg=\"%s\"\n",
                     escape_msg(e.what()).c_str());
        return 1;
    }
    return 0;
}
