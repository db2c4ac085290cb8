#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hyperpatch/compose.hpp"
#include "hyperpatch/database.hpp"
#include "hyperpatch/error.hpp"
#include "hyperpatch/layers.hpp"
#include "hyperpatch/metrics.hpp"
#include "hyperpatch/search.hpp"
#include "hyperpatch/store.hpp"

namespace hyperpatch::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

struct Common {
    unsigned threads = 1;
};

struct IngestArgs {
    std::string manifest;
};

struct ReconstructArgs {
    std::string manifest;
    std::string layer;
    std::optional<std::uint32_t> query_pair;
    std::string query_tensor;
    std::string query_descriptor;
    std::string source = "output";
    std::string search = "hpm";
    long long top_k = 16;
    long long iterations = 1024;
    std::uint64_t seed = 0;
    long long samples = 1;
    bool exclude_query = false;
    std::string gt;
    std::string palette;
    std::string out_dir;
};

struct EvaluateArgs {
    std::string recon;
    std::string field;
    std::string manifest;
    std::string layer;
    std::string source = "output";
    std::string gt;
    std::string palette;
    std::string baseline;
};

struct VisualizeArgs {
    std::string field;
    std::string manifest;
    std::string layer;
    std::string query_image;
    std::optional<std::uint32_t> query_pair;
    std::string out_dir;
};

struct FilterArgs {
    std::string manifest;
    std::vector<std::int64_t> include;
    std::vector<std::int64_t> exclude;
    std::vector<std::string> tags;
    std::vector<std::string> without_tags;
    std::string out;
};

struct SemanticArgs {
    std::string manifest;
    std::uint32_t pair_a = 0;
    std::uint32_t pair_b = 0;
    std::string layer;
    std::vector<std::string> classes;
    std::string palette;
    std::string labels = "output";
    long long iterations = 1024;
    std::uint64_t seed = 0;
    std::string out_dir;
};

[[noreturn]] void usage_error(const std::string& message) {
    throw Error(ErrorKind::Config, message);
}

ImageSource parse_source(const std::string& text) {
    if (text == "input") return ImageSource::Input;
    if (text == "output") return ImageSource::Output;
    usage_error("--source must be 'input' or 'output'");
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create output directory " + dir + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
    write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

ClassPalette resolve_palette(const std::string& flag, const Manifest* manifest) {
    if (!flag.empty()) return ClassPalette::load(flag);
    if (manifest != nullptr && manifest->palette) {
        return ClassPalette::load(manifest->resolve(*manifest->palette));
    }
    usage_error("label metrics need a palette: pass --palette or set one in the manifest");
}

std::vector<std::uint32_t> all_ids(const TrainingDatabase& db) {
    std::vector<std::uint32_t> ids(db.size());
    for (std::uint32_t i = 0; i < ids.size(); ++i) ids[i] = i;
    return ids;
}

int cmd_ingest(const IngestArgs& args, std::ostream& out) {
    const auto result = ingest(args.manifest);
    out << result.report.to_json().dump(2) << "\n";
    return kExitOk;
}

int cmd_reconstruct(const ReconstructArgs& args, const Common& common, std::ostream& out) {
    if (args.top_k < 1) usage_error("top_k must be ≥ 1");
    if (args.iterations < 0) usage_error("iterations must be ≥ 0");
    if (args.samples < 1) usage_error("samples must be ≥ 1");
    if (args.search != "oracle" && args.search != "hpm") usage_error("--search must be 'oracle' or 'hpm'");
    const auto source = parse_source(args.source);
    if (args.query_pair.has_value() == !args.query_tensor.empty()) {
        usage_error("give exactly one of --query-pair or --query-tensor");
    }

    const auto started = std::chrono::steady_clock::now();
    const auto loaded = ingest(args.manifest);
    const auto& db = loaded.db;
    const auto& layer = db.layer(args.layer);

    ActivationTensor query;
    std::vector<float> descriptor;
    if (args.query_pair) {
        query = db.tensor(*args.query_pair, layer.name);
        descriptor = db.pair(*args.query_pair).global_descriptor;
    } else {
        query = read_tensor(args.query_tensor, layer.name);
        if (!args.query_descriptor.empty()) {
            if (db.descriptor_layer().empty()) usage_error("manifest declares no descriptor layer");
            descriptor = global_descriptor(read_tensor(args.query_descriptor, db.descriptor_layer()),
                                           db.descriptor_layer());
        }
    }

    std::vector<std::uint32_t> pool = all_ids(db);
    std::string pruning = "all";
    if (!descriptor.empty()) {
        pool = top_k_neighbors(db, descriptor, db.size());
        pruning = "top_k";
    }
    if (args.exclude_query && args.query_pair) {
        std::erase(pool, *args.query_pair);
    }
    if (pool.size() > static_cast<std::size_t>(args.top_k)) {
        if (pruning == "all") pruning = "unavailable";
        else pool.resize(static_cast<std::size_t>(args.top_k));
    }
    if (pool.empty()) throw Error(ErrorKind::EmptySet, "no candidate images left to search");

    NNField field;
    if (args.search == "oracle") {
        field = exhaustive_search(query, db, layer, pool, common.threads);
    } else {
        SearchConfig config;
        config.iterations = static_cast<std::uint32_t>(args.iterations);
        config.rng_seed = args.seed;
        config.random_samples_per_cell_per_iter = static_cast<std::uint32_t>(args.samples);
        config.candidate_image_ids = pool;
        config.threads = common.threads;
        field = hpm_run(query, db, layer, config);
    }
    const auto recon = reconstruct(field, db, layer, source, common.threads);
    const auto elapsed = std::chrono::duration<double, std::milli>(
        std::chrono::steady_clock::now() - started);

    ensure_dir(args.out_dir);
    const fs::path dir(args.out_dir);
    write_png(recon.image, dir / "reconstruction.png");
    write_field(field, dir / "field.chpf");

    json report;
    report["layer"] = layer.name;
    report["source"] = args.source;
    report["search"] = args.search;
    report["top_k"] = args.top_k;
    report["pruning"] = pruning;
    report["candidates"] = pool;
    report["iterations"] = args.search == "hpm" ? json(args.iterations) : json(nullptr);
    report["seed"] = args.seed;
    report["field"] = {{"rows", field.rows}, {"cols", field.cols}};
    report["eval_count"] = field.eval_count;
    report["uncovered_pixels"] = recon.uncovered_pixels;
    report["wall_time_ms"] = elapsed.count();
    report["outputs"] = {{"reconstruction", (dir / "reconstruction.png").string()},
                         {"field", (dir / "field.chpf").string()}};
    if (!args.gt.empty()) {
        const auto palette = resolve_palette(args.palette, &loaded.manifest);
        const auto metrics = evaluate_labels(recon.image, read_png(args.gt), palette);
        report["metrics"] = metrics.to_json(palette);
    }
    write_text(dir / "report.json", report.dump(2) + "\n");
    out << report.dump(2) << "\n";
    return kExitOk;
}

int cmd_evaluate(const EvaluateArgs& args, const Common& common, std::ostream& out) {
    if (args.recon.empty() == args.field.empty()) usage_error("give exactly one of --recon or --field");
    std::optional<Manifest> manifest;
    Raster prediction;
    if (!args.recon.empty()) {
        if (!args.manifest.empty()) manifest = Manifest::load(args.manifest);
        prediction = read_png(args.recon);
    } else {
        if (args.manifest.empty() || args.layer.empty()) {
            usage_error("--field needs --manifest and --layer");
        }
        const auto source = parse_source(args.source);
        auto loaded = ingest(args.manifest);
        manifest = loaded.manifest;
        const auto& layer = loaded.db.layer(args.layer);
        const auto field = read_field(args.field, layer.name);
        prediction = reconstruct(field, loaded.db, layer, source, common.threads).image;
    }
    const auto palette = resolve_palette(args.palette, manifest ? &*manifest : nullptr);
    const auto gt = read_png(args.gt);
    std::optional<Raster> baseline;
    if (!args.baseline.empty()) baseline = read_png(args.baseline);
    const auto report = evaluate_labels(prediction, gt, palette, baseline ? &*baseline : nullptr);
    out << report.to_json(palette).dump(2) << "\n";
    return kExitOk;
}

int cmd_visualize(const VisualizeArgs& args, std::ostream& out) {
    if (args.query_image.empty() == !args.query_pair.has_value()) {
        usage_error("give exactly one of --query-image or --query-pair");
    }
    const auto loaded = ingest(args.manifest);
    const auto& layer = loaded.db.layer(args.layer);
    NNField field;
    try {
        field = read_field(args.field, layer.name);
    } catch (const Error& e) {
        // A field file that exists but cannot be decoded is a user error.
        if (e.kind() == ErrorKind::Io) throw;
        throw Error(ErrorKind::Config, std::string("corrupt field dump: ") + e.what());
    }
    const Raster query = args.query_pair ? loaded.db.pair(*args.query_pair).input_image
                                         : read_png(args.query_image);
    const auto map = correspondence_map(field, loaded.db, layer, query);

    ensure_dir(args.out_dir);
    const fs::path dir(args.out_dir);
    write_png(map.query_tint, dir / "query_tint.png");
    json sources = json::array();
    for (const auto& [id, raster] : map.sources) {
        const auto name = "source_" + std::to_string(id) + ".png";
        write_png(raster, dir / name);
        sources.push_back({{"image_id", id}, {"png", (dir / name).string()}});
    }
    write_text(dir / "legend.json", map.legend_json() + "\n");

    json report;
    report["layer"] = layer.name;
    report["query_tint"] = (dir / "query_tint.png").string();
    report["sources"] = sources;
    report["legend"] = json::parse(map.legend_json());
    out << report.dump(2) << "\n";
    return kExitOk;
}

int cmd_filter(const FilterArgs& args, std::ostream& out) {
    const auto manifest = Manifest::load(args.manifest);
    std::set<std::int64_t> known;
    for (const auto& p : manifest.pairs) known.insert(p.id);
    for (const auto* list : {&args.include, &args.exclude}) {
        for (auto id : *list) {
            if (!known.count(id)) usage_error("pair id " + std::to_string(id) + " does not exist");
        }
    }

    std::vector<const Manifest::Pair*> kept;
    for (const auto& p : manifest.pairs) {
        if (!args.include.empty() &&
            std::find(args.include.begin(), args.include.end(), p.id) == args.include.end()) {
            continue;
        }
        if (std::find(args.exclude.begin(), args.exclude.end(), p.id) != args.exclude.end()) continue;
        const auto has = [&](const std::string& tag) {
            return std::find(p.tags.begin(), p.tags.end(), tag) != p.tags.end();
        };
        if (!std::all_of(args.tags.begin(), args.tags.end(), has)) continue;
        if (std::any_of(args.without_tags.begin(), args.without_tags.end(), has)) continue;
        kept.push_back(&p);
    }
    if (kept.empty()) usage_error("filter leaves no pairs");
    std::sort(kept.begin(), kept.end(), [](auto* a, auto* b) { return a->id < b->id; });

    const auto absolute = [&](const std::string& path) {
        return fs::absolute(manifest.resolve(path)).lexically_normal().string();
    };
    Manifest derived = manifest;
    derived.pairs.clear();
    json id_map = json::object();
    for (std::size_t i = 0; i < kept.size(); ++i) {
        Manifest::Pair p = *kept[i];
        id_map[std::to_string(i)] = p.id;
        p.id = static_cast<std::int64_t>(i);
        p.input_png = absolute(p.input_png);
        p.output_png = absolute(p.output_png);
        for (auto& [layer, path] : p.tensors) path = absolute(path);
        derived.pairs.push_back(std::move(p));
    }
    if (derived.palette) derived.palette = absolute(*derived.palette);
    derived.extra["derived_from"] = {
        {"manifest", fs::absolute(args.manifest).lexically_normal().string()}, {"id_map", id_map}};

    const fs::path out_path(args.out);
    if (out_path.has_parent_path()) ensure_dir(out_path.parent_path().string());
    derived.save(out_path);

    json report;
    report["manifest"] = out_path.string();
    report["pairs"] = kept.size();
    report["id_map"] = id_map;
    out << report.dump(2) << "\n";
    return kExitOk;
}

int cmd_semantic(const SemanticArgs& args, const Common& common, std::ostream& out) {
    if (args.iterations < 0) usage_error("iterations must be ≥ 0");
    const auto loaded = ingest(args.manifest);
    const auto& db = loaded.db;
    const auto& layer = db.layer(args.layer);
    const auto palette = resolve_palette(args.palette, &loaded.manifest);
    const auto source = parse_source(args.labels);

    std::vector<std::uint32_t> classes;
    for (const auto& name : args.classes) classes.push_back(palette.index_of(name));
    if (args.classes.empty()) {
        for (std::uint32_t c = 0; c < palette.size(); ++c) classes.push_back(c);
    }

    const auto& a = db.pair(args.pair_a);
    const auto& b = db.pair(args.pair_b);
    const auto& labels_a = source == ImageSource::Output ? a.output_image : a.input_image;
    const auto& labels_b = source == ImageSource::Output ? b.output_image : b.input_image;
    const auto& image_a = source == ImageSource::Output ? a.input_image : a.output_image;
    const auto& image_b = source == ImageSource::Output ? b.input_image : b.output_image;

    SearchConfig config;
    config.iterations = static_cast<std::uint32_t>(args.iterations);
    config.rng_seed = args.seed;
    config.threads = common.threads;
    const auto result = semantic_correspondence(
        SemanticMember{db.tensor(a.image_id, layer.name), image_a, labels_a},
        SemanticMember{db.tensor(b.image_id, layer.name), image_b, labels_b}, layer, palette,
        classes, config);

    ensure_dir(args.out_dir);
    const fs::path dir(args.out_dir);
    write_png(result.query, dir / "semantic_a.png");
    write_png(result.match, dir / "semantic_b.png");
    write_png(result.side_by_side, dir / "semantic_pair.png");

    json report;
    report["layer"] = layer.name;
    report["pair_a"] = args.pair_a;
    report["pair_b"] = args.pair_b;
    json names = json::array();
    for (auto c : classes) names.push_back(palette[c].name);
    report["classes"] = names;
    report["eval_count"] = result.field.eval_count;
    report["outputs"] = {(dir / "semantic_a.png").string(), (dir / "semantic_b.png").string(),
                         (dir / "semantic_pair.png").string()};
    out << report.dump(2) << "\n";
    return kExitOk;
}

int cmd_layers(std::ostream& out) {
    json layers = json::array();
    for (const auto& spec : default_layer_table()) {
        layers.push_back({{"name", spec.name},
                          {"hyperpatch", {spec.hyperpatch_h, spec.hyperpatch_w, spec.depth}},
                          {"patch_size", spec.patch_size},
                          {"scale", spec.scale},
                          {"role", to_string(spec.role)},
                          {"tensor_extent_at_256", default_tensor_extent(spec, 256)}});
    }
    out << layers.dump(2) << "\n";
    return kExitOk;
}

int exit_code_for(ErrorKind kind) { return kind == ErrorKind::Io ? kExitIo : kExitUsage; }

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Dense hyperpatch correspondences between CNN activations and a training set"};
    app.name("hyperpatch");
    app.require_subcommand(1);
    app.fallthrough();

    Common common;
    app.add_option("--threads", common.threads, "Worker threads (results do not depend on it)")
        ->check(CLI::Range(1u, 1024u));

    IngestArgs ingest_args;
    auto* ingest_cmd = app.add_subcommand("ingest", "Validate a manifest and print an ingest report");
    ingest_cmd->add_option("manifest,--manifest", ingest_args.manifest, "Manifest JSON")->required();

    ReconstructArgs rec;
    auto* rec_cmd = app.add_subcommand("reconstruct", "Compose an image from patch correspondences");
    rec_cmd->add_option("--manifest", rec.manifest, "Training-set manifest")->required();
    rec_cmd->add_option("--layer", rec.layer, "Layer to match at")->required();
    rec_cmd->add_option("--query-pair", rec.query_pair, "Use a database pair as the query");
    rec_cmd->add_option("--query-tensor", rec.query_tensor, "Query tensor file at --layer");
    rec_cmd->add_option("--query-descriptor", rec.query_descriptor,
                        "Query tensor file at the descriptor layer (enables top-k pruning)");
    rec_cmd->add_option("--source", rec.source, "input|output")->capture_default_str();
    rec_cmd->add_option("--search", rec.search, "oracle|hpm")->capture_default_str();
    rec_cmd->add_option("--top-k", rec.top_k, "Global neighbours to search")->capture_default_str();
    rec_cmd->add_option("--iterations", rec.iterations, "Search rounds")->capture_default_str();
    rec_cmd->add_option("--seed", rec.seed, "RNG seed")->capture_default_str();
    rec_cmd->add_option("--samples", rec.samples, "Random samples per cell per round")
        ->capture_default_str();
    rec_cmd->add_flag("--exclude-query", rec.exclude_query, "Drop the query pair from the candidates");
    rec_cmd->add_option("--gt", rec.gt, "Ground-truth label PNG; adds a metric report");
    rec_cmd->add_option("--palette", rec.palette, "Class palette JSON");
    rec_cmd->add_option("--out", rec.out_dir, "Output directory")->required();

    EvaluateArgs ev;
    auto* ev_cmd = app.add_subcommand("evaluate", "Mean pixel accuracy and mean IoU of a label image");
    ev_cmd->add_option("--recon", ev.recon, "Reconstructed label PNG");
    ev_cmd->add_option("--field", ev.field, "Field dump to reconstruct from");
    ev_cmd->add_option("--manifest", ev.manifest, "Manifest (for --field, or for its palette)");
    ev_cmd->add_option("--layer", ev.layer, "Layer of the field dump");
    ev_cmd->add_option("--source", ev.source, "input|output (with --field)")->capture_default_str();
    ev_cmd->add_option("--gt", ev.gt, "Ground-truth label PNG")->required();
    ev_cmd->add_option("--palette", ev.palette, "Class palette JSON");
    ev_cmd->add_option("--baseline", ev.baseline, "Network output PNG to report deltas against");

    VisualizeArgs vis;
    auto* vis_cmd = app.add_subcommand("visualize", "Colour-coded correspondence maps");
    vis_cmd->add_option("--field", vis.field, "Field dump")->required();
    vis_cmd->add_option("--manifest", vis.manifest, "Training-set manifest")->required();
    vis_cmd->add_option("--layer", vis.layer, "Layer of the field dump")->required();
    vis_cmd->add_option("--query-image", vis.query_image, "Query image PNG");
    vis_cmd->add_option("--query-pair", vis.query_pair, "Use a database pair's input as the query image");
    vis_cmd->add_option("--out", vis.out_dir, "Output directory")->required();

    FilterArgs flt;
    auto* flt_cmd = app.add_subcommand("filter", "Derive a manifest from a subset of pairs");
    flt_cmd->add_option("--manifest", flt.manifest, "Source manifest")->required();
    flt_cmd->add_option("--include", flt.include, "Keep only these ids")->delimiter(',');
    flt_cmd->add_option("--exclude", flt.exclude, "Drop these ids")->delimiter(',');
    flt_cmd->add_option("--tag", flt.tags, "Keep pairs carrying this tag")->delimiter(',');
    flt_cmd->add_option("--without-tag", flt.without_tags, "Drop pairs carrying this tag")
        ->delimiter(',');
    flt_cmd->add_option("--out", flt.out, "Derived manifest path")->required();

    SemanticArgs sem;
    auto* sem_cmd = app.add_subcommand("semantic", "Class-coloured correspondences between two pairs");
    sem_cmd->add_option("--manifest", sem.manifest, "Training-set manifest")->required();
    sem_cmd->add_option("--pair-a", sem.pair_a, "Query pair id")->required();
    sem_cmd->add_option("--pair-b", sem.pair_b, "Matched pair id")->required();
    sem_cmd->add_option("--layer", sem.layer, "Layer to match at")->required();
    sem_cmd->add_option("--classes", sem.classes, "Class names to colour (default: all)")
        ->delimiter(',');
    sem_cmd->add_option("--palette", sem.palette, "Class palette JSON");
    sem_cmd->add_option("--labels", sem.labels, "Which image holds the labels: input|output")
        ->capture_default_str();
    sem_cmd->add_option("--iterations", sem.iterations, "Search rounds")->capture_default_str();
    sem_cmd->add_option("--seed", sem.seed, "RNG seed")->capture_default_str();
    sem_cmd->add_option("--out", sem.out_dir, "Output directory")->required();

    app.add_subcommand("layers", "Print the default encoder/decoder layer table");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (*ingest_cmd) return cmd_ingest(ingest_args, out);
        if (*rec_cmd) return cmd_reconstruct(rec, common, out);
        if (*ev_cmd) return cmd_evaluate(ev, common, out);
        if (*vis_cmd) return cmd_visualize(vis, out);
        if (*flt_cmd) return cmd_filter(flt, out);
        if (*sem_cmd) return cmd_semantic(sem, common, out);
        return cmd_layers(out);
    } catch (const Error& e) {
        err << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitIo;
    }
}

}  // namespace hyperpatch::cli
