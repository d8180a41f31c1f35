// alert-sift: command-line front end for the triage pipeline.
//
//   alert-sift synth    --alerts a.ndjson --rules rules.csv
//   alert-sift label    --input a.ndjson --rules rules.csv --output labeled.ndjson
//   alert-sift sample   --input labeled.ndjson --split-date 2022-05-01 --train-out tr.ndjson --test-out te.ndjson
//   alert-sift encode   --input tr.ndjson --output train.csv
//   alert-sift train    --input train.csv --output model.json
//   alert-sift evaluate --model model.json --test test.csv --train train.csv --report report.json
//
// Options may also come from --config (TOML/INI; subcommand options go in a
// section named after the subcommand). Flags win over the file.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "alert_sift/alert_sift.hpp"

namespace as = alert_sift;
using nlohmann::json;

namespace {

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw as::IoError("cannot open " + path);
  return in;
}

// Outputs are rendered in memory first so a failing step leaves no partial file.
void write_file(const std::string& path, const std::string& content) {
  if (const auto dir = std::filesystem::path(path).parent_path(); !dir.empty())
    std::filesystem::create_directories(dir);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw as::IoError("cannot write " + path);
  out << content;
  if (!out.flush()) throw as::IoError("write failed: " + path);
}

as::FieldMap load_field_map(const std::string& path) {
  if (path.empty()) return {};
  auto in = open_in(path);
  return as::FieldMap::load(in);
}

as::ScalingCaps load_caps(const std::string& path) {
  if (path.empty()) return {};
  auto in = open_in(path);
  return as::ScalingCaps::load(in);
}

as::FeatureMatrix load_matrix(const std::string& path) {
  auto in = open_in(path);
  return as::read_matrix_csv(in);
}

as::Forest load_model(const std::string& path) {
  auto in = open_in(path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw as::ParseError(std::string("model is not JSON: ") + e.what(), 0);
  }
  return as::forest_from_json(j);
}

std::vector<as::LabeledAlert> load_labeled(const std::string& path, const as::FieldMap& map) {
  auto in = open_in(path);
  return as::read_labeled_corpus(in, map);
}

/// Reorders `m` to the model's columns, matched by name.
as::FeatureMatrix align_to(const as::FeatureMatrix& m, const std::vector<std::string>& names) {
  std::map<std::string, std::size_t> index;
  for (std::size_t j = 0; j < m.names.size(); ++j) index.emplace(m.names[j], j);
  std::vector<std::size_t> cols;
  for (const auto& n : names) {
    const auto it = index.find(n);
    if (it == index.end()) throw as::ValidationError("input lacks model feature '" + n + "'");
    cols.push_back(it->second);
  }
  return m.project(cols);
}

as::Timestamp parse_date(const std::string& text) {
  const auto t = as::parse_timestamp(text);
  if (!t) throw as::ValidationError("cannot parse date '" + text + "'");
  return *t;
}

std::string fixed(double x, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

std::string opt_text(const std::optional<double>& v) { return v ? fixed(*v) : "n/a"; }

struct Options {
  std::uint64_t seed = 42;

  struct {
    std::string alerts = "synth/alerts.ndjson", rules = "synth/rules.csv", truth;
    std::size_t n_tp = 982, n_fp = 1126, n_rules = 500, dup = 1;
    double signal = 0.9;
    std::string start = "2022-01-01", end = "2022-08-01";
    bool embed = false;
  } synth;

  struct {
    std::string input, field_map, output, report;
  } ingest;

  struct {
    std::string input, rules, keywords, field_map, output, lists;
  } label;

  struct {
    std::string input, split_date, train_out, test_out;
    std::size_t stride = 100, cap = 10;
  } sample;

  struct {
    std::string input, output, caps, profile = "core20";
  } encode;

  struct {
    std::string input, scores, output;
    std::size_t k = 20;
  } select;

  struct {
    std::string input, output, profile = "core20";
    std::size_t trees = 100, depth = 6, min_split = 2, max_features = 0;
  } train;

  struct {
    std::string model, test, train, report, summary;
    std::size_t k = 10;
    double threshold = 0.5, minutes = 4.0;
  } evaluate;

  struct {
    std::string model, input, output, per_alert;
  } explain;

  struct {
    std::string model, input, output, field_map, caps;
    double threshold = 0.5;
  } predict;
};

std::string run_synth(const Options& o) {
  as::SynthSpec spec;
  spec.n_tp = o.synth.n_tp;
  spec.n_fp = o.synth.n_fp;
  spec.n_rules = o.synth.n_rules;
  spec.duplication_factor = o.synth.dup;
  spec.signal_strength = o.synth.signal;
  spec.seed = o.seed;
  spec.start = parse_date(o.synth.start);
  spec.end = parse_date(o.synth.end);
  spec.embed_comments = o.synth.embed;
  const auto c = as::generate_corpus(spec);

  std::ostringstream alerts, rules;
  as::write_alerts_ndjson(alerts, c.alerts);
  as::write_rule_comments(rules, c.rules);
  write_file(o.synth.alerts, alerts.str());
  write_file(o.synth.rules, rules.str());
  if (!o.synth.truth.empty()) {
    std::ostringstream truth;
    as::write_truth_csv(truth, c.truth);
    write_file(o.synth.truth, truth.str());
  }
  return "synthesized " + std::to_string(c.alerts.size()) + " alerts over " + std::to_string(c.rules.size()) +
         " rules";
}

std::string run_ingest(const Options& o) {
  const auto map = load_field_map(o.ingest.field_map);
  auto in = open_in(o.ingest.input);
  const auto corpus = as::read_corpus(in, map);
  if (!o.ingest.output.empty()) {
    std::ostringstream out;
    as::write_alerts_ndjson(out, corpus.alerts);
    write_file(o.ingest.output, out.str());
  }
  if (!o.ingest.report.empty()) {
    json rejected = json::array();
    for (const auto& [line, reason] : corpus.report.rejection_reasons)
      rejected.push_back({{"line", line}, {"reason", reason}});
    write_file(o.ingest.report, json{{"accepted", corpus.report.accepted},
                                     {"rejected", corpus.report.rejected},
                                     {"rejections", rejected}}
                                        .dump(2) +
                                    "\n");
  }
  return "ingested " + std::to_string(corpus.report.accepted) + " alerts, rejected " +
         std::to_string(corpus.report.rejected) + " lines";
}

std::string run_label(const Options& o) {
  const auto map = load_field_map(o.label.field_map);
  auto in = open_in(o.label.input);
  auto corpus = as::read_corpus(in, map);
  std::vector<as::RuleComment> rules;
  if (!o.label.rules.empty()) {
    auto rin = open_in(o.label.rules);
    rules = as::read_rule_comments(rin);
    as::attach_rule_comments(corpus.alerts, rules);
  } else {
    rules = as::rules_from_alerts(corpus.alerts);
  }
  as::KeywordConfig keywords;
  if (!o.label.keywords.empty()) {
    auto kin = open_in(o.label.keywords);
    keywords = as::KeywordConfig::load(kin);
  }
  const auto lists = as::build_label_lists(rules, keywords);
  const auto labeled = as::label_corpus(corpus.alerts, lists);

  std::ostringstream out;
  as::write_labeled_corpus(out, labeled, map);
  write_file(o.label.output, out.str());
  if (!o.label.lists.empty()) {
    std::ostringstream l;
    as::write_label_lists(l, lists);
    write_file(o.label.lists, l.str());
  }
  const auto tp = std::count_if(labeled.begin(), labeled.end(), [](const auto& a) { return a.label == as::Label::TP; });
  return "labeled " + std::to_string(labeled.size()) + " of " + std::to_string(corpus.alerts.size()) + " alerts (" +
         std::to_string(tp) + " TP, " + std::to_string(labeled.size() - static_cast<std::size_t>(tp)) + " FP) from " +
         std::to_string(lists.tp.size()) + " TP and " + std::to_string(lists.fp.size()) + " FP rules";
}

std::string run_sample(const Options& o) {
  const auto labeled = load_labeled(o.sample.input, {});
  const as::SampleParams params{o.sample.stride, o.sample.cap};
  const auto kept = as::dedup_sample(labeled, params);
  auto render = [](const std::vector<as::LabeledAlert>& v) {
    std::ostringstream s;
    as::write_labeled_corpus(s, v);
    return s.str();
  };
  if (o.sample.split_date.empty()) {
    write_file(o.sample.train_out, render(kept));
    return "sampled " + std::to_string(kept.size()) + " of " + std::to_string(labeled.size()) + " alerts";
  }
  if (o.sample.test_out.empty()) throw as::ValidationError("--split-date needs --test-out");
  const auto part = as::partition_by_period(kept, parse_date(o.sample.split_date));
  write_file(o.sample.train_out, render(part.train));
  write_file(o.sample.test_out, render(part.test));
  return "sampled " + std::to_string(kept.size()) + " of " + std::to_string(labeled.size()) + " alerts: " +
         std::to_string(part.train.size()) + " train, " + std::to_string(part.test.size()) + " test";
}

std::string run_encode(const Options& o) {
  const auto labeled = load_labeled(o.encode.input, {});
  const auto m = as::encode_corpus(labeled, as::parse_profile(o.encode.profile), load_caps(o.encode.caps));
  std::ostringstream out;
  as::write_matrix_csv(out, m);
  write_file(o.encode.output, out.str());
  return "encoded " + std::to_string(m.size()) + " rows x " + std::to_string(m.width()) + " features";
}

std::string run_select(const Options& o) {
  const auto m = load_matrix(o.select.input);
  const auto masked = as::mask_missing_counters(m.rows);
  const auto sel = as::chi2_select(masked, m.labels, o.select.k);
  const auto screen = as::screen_features(m.rows, m.labels);
  if (!o.select.scores.empty()) {
    std::ostringstream s;
    s << "feature,chi2,variance,pearson,selected\n";
    std::vector<char> chosen(m.width(), 0);
    for (const auto j : sel.selected_indices) chosen[j] = 1;
    for (std::size_t j = 0; j < m.width(); ++j)
      s << as::csv::join({m.names[j], as::format_number(sel.chi2_scores[j]), as::format_number(screen.variance[j]),
                          screen.pearson[j] ? as::format_number(*screen.pearson[j]) : "",
                          chosen[j] ? "1" : "0"})
        << '\n';
    write_file(o.select.scores, s.str());
  }
  if (!o.select.output.empty()) {
    std::ostringstream out;
    as::write_matrix_csv(out, m.project(sel.selected_indices));
    write_file(o.select.output, out.str());
  }
  std::string top;
  for (std::size_t i = 0; i < std::min<std::size_t>(3, sel.selected_indices.size()); ++i)
    top += (i ? ", " : "") + m.names[sel.selected_indices[i]];
  return "selected " + std::to_string(sel.selected_indices.size()) + " of " + std::to_string(m.width()) +
         " features (top: " + top + ")";
}

as::ForestParams forest_params(const Options& o) {
  as::ForestParams p;
  p.n_estimators = o.train.trees;
  p.max_depth = o.train.depth;
  p.min_samples_split = o.train.min_split;
  if (o.train.max_features > 0) p.max_features = o.train.max_features;
  p.seed = o.seed;
  p.validate();
  return p;
}

std::string run_train(const Options& o) {
  const auto m = load_matrix(o.train.input);
  const auto forest = as::train_forest(m, forest_params(o), as::parse_profile(o.train.profile));
  write_file(o.train.output, as::forest_to_json(forest).dump() + "\n");
  return "trained " + std::to_string(forest.trees.size()) + " trees, depth≤" + std::to_string(o.train.depth);
}

std::string run_evaluate(const Options& o) {
  const auto forest = load_model(o.evaluate.model);
  const auto test = align_to(load_matrix(o.evaluate.test), forest.feature_names);
  const auto cm = as::evaluate_forest(forest, test, o.evaluate.threshold);
  const auto m = as::metrics(cm);
  const double savings = as::workload_savings(static_cast<double>(cm.fp_as_fp), o.evaluate.minutes);

  json per_fold = json::array();
  json mean, variance;
  if (!o.evaluate.train.empty()) {
    auto params = forest.params;
    params.seed = o.seed;
    const auto train = align_to(load_matrix(o.evaluate.train), forest.feature_names);
    const auto cv = as::cross_validate(train, params, o.evaluate.k, o.seed, o.evaluate.threshold);
    for (std::size_t f = 0; f < cv.folds.size(); ++f)
      per_fold.push_back({{"fold", f}, {"confusion", as::to_json(cv.folds[f].confusion)},
                          {"metrics", as::to_json(cv.folds[f].metrics)}});
    mean = cv.mean_accuracy;
    variance = cv.accuracy_variance;
  }
  const json report{{"per_fold", per_fold},
                    {"mean", mean},
                    {"variance", variance},
                    {"confusion", as::to_json(cm)},
                    {"metrics", as::to_json(m)},
                    {"savings_hours", savings},
                    {"threshold", o.evaluate.threshold},
                    {"minutes_per_alert", o.evaluate.minutes}};
  write_file(o.evaluate.report, report.dump(2) + "\n");
  if (!o.evaluate.summary.empty()) {
    std::ostringstream s;
    s << "metric,value\n";
    const auto mj = as::to_json(m), cj = as::to_json(cm);
    for (const auto& [k, v] : mj.items()) s << k << ',' << (v.is_null() ? "" : as::format_number(v.get<double>())) << '\n';
    for (const auto& [k, v] : cj.items()) s << k << ',' << v.get<std::uint64_t>() << '\n';
    if (!mean.is_null()) s << "cv_mean_accuracy," << as::format_number(mean.get<double>()) << '\n'
                           << "cv_accuracy_variance," << as::format_number(variance.get<double>()) << '\n';
    s << "savings_hours," << as::format_number(savings) << '\n';
    write_file(o.evaluate.summary, s.str());
  }
  return "accuracy " + opt_text(m.accuracy) + ", TP recall " + opt_text(m.tp_recall) + " on " +
         std::to_string(cm.total()) + " rows; " + fixed(savings, 1) + " analyst hours saved";
}

std::string run_explain(const Options& o) {
  const auto forest = load_model(o.explain.model);
  const auto data = align_to(load_matrix(o.explain.input), forest.feature_names);
  const auto imp = as::global_importance(forest, data.rows);
  std::ostringstream s;
  s << "feature,mean_abs_shap\n";
  for (const auto& f : imp) s << as::csv::join({f.feature, as::format_number(f.mean_abs_shap)}) << '\n';
  write_file(o.explain.output, s.str());
  if (!o.explain.per_alert.empty()) {
    std::ostringstream pa;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto a = as::tree_shap(forest, data.rows[i]);
      json phi = json::object();
      for (std::size_t j = 0; j < a.phi.size(); ++j) phi[forest.feature_names[j]] = a.phi[j];
      pa << json{{"row", i}, {"base_value", a.base_value}, {"proba", a.total()}, {"phi", phi}}.dump() << '\n';
    }
    write_file(o.explain.per_alert, pa.str());
  }
  return "explained " + std::to_string(data.size()) + " rows; top feature " + imp.front().feature + " (" +
         fixed(imp.front().mean_abs_shap) + ")";
}

std::string run_predict(const Options& o) {
  const auto forest = load_model(o.predict.model);
  const auto map = load_field_map(o.predict.field_map);
  const auto caps = load_caps(o.predict.caps);
  auto in = open_in(o.predict.input);
  const auto corpus = as::read_corpus(in, map);

  const auto cols = as::exported_columns(forest.profile, caps);
  as::FeatureMatrix encoded;
  for (const auto c : cols) encoded.names.emplace_back(as::kFeatureNames[c]);
  for (const auto& a : corpus.alerts) {
    const auto v = as::encode_alert(a, forest.profile, caps);
    std::vector<double> row;
    for (const auto c : cols) row.push_back(v.values[c]);
    encoded.rows.push_back(std::move(row));
    encoded.labels.push_back(0);
  }
  const auto rows = align_to(encoded, forest.feature_names).rows;

  std::ostringstream s;
  s << "line,rule_uuid,timestamp,proba_tp,label\n";
  std::size_t tp = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double p = as::predict_proba(forest, rows[i]);
    const auto label = as::predict(forest, rows[i], o.predict.threshold);
    tp += label == as::Label::TP;
    s << as::csv::join({std::to_string(corpus.source_lines[i]), corpus.alerts[i].rule_uuid,
                        as::format_timestamp(corpus.alerts[i].timestamp), as::format_number(p),
                        label == as::Label::TP ? "TP" : "FP"})
      << '\n';
  }
  write_file(o.predict.output, s.str());
  return "predicted " + std::to_string(rows.size()) + " alerts: " + std::to_string(tp) + " TP, " +
         std::to_string(rows.size() - tp) + " FP (" + std::to_string(corpus.report.rejected) + " lines rejected)";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weakly supervised triage of Suricata alerts"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI file with option defaults");
  app.set_version_flag("--version", std::to_string(as::kModelFormatVersion), "Print the model format version");

  Options o;
  app.add_option("--seed", o.seed, "Seed for every random draw")->capture_default_str();

  auto* synth = app.add_subcommand("synth", "Generate a synthetic alert corpus");
  synth->add_option("--alerts", o.synth.alerts, "Output NDJSON")->capture_default_str();
  synth->add_option("--rules", o.synth.rules, "Output rule-comment CSV")->capture_default_str();
  synth->add_option("--truth", o.synth.truth, "Output ground-truth CSV");
  synth->add_option("--n-tp", o.synth.n_tp)->capture_default_str();
  synth->add_option("--n-fp", o.synth.n_fp)->capture_default_str();
  synth->add_option("--n-rules", o.synth.n_rules)->capture_default_str();
  synth->add_option("--duplication", o.synth.dup, "Replicas per base alert")->capture_default_str();
  synth->add_option("--signal", o.synth.signal, "Signal strength in [0,1]")->capture_default_str();
  synth->add_option("--start", o.synth.start)->capture_default_str();
  synth->add_option("--end", o.synth.end)->capture_default_str();
  synth->add_flag("--embed-comments", o.synth.embed, "Also write rev_comment into each alert");

  auto* ingest = app.add_subcommand("ingest", "Parse and validate an EVE NDJSON file");
  ingest->add_option("--input", o.ingest.input)->required();
  ingest->add_option("--field-map", o.ingest.field_map, "name=dotted.path overrides");
  ingest->add_option("--output", o.ingest.output, "Normalized NDJSON");
  ingest->add_option("--report", o.ingest.report, "Ingest report JSON");

  auto* label = app.add_subcommand("label", "Weakly label alerts from rule comments");
  label->add_option("--input", o.label.input)->required();
  label->add_option("--rules", o.label.rules, "Rule-comment CSV (else comments embedded in alerts)");
  label->add_option("--keywords", o.label.keywords, "Keyword list file");
  label->add_option("--field-map", o.label.field_map);
  label->add_option("--output", o.label.output, "Labeled NDJSON")->required();
  label->add_option("--lists", o.label.lists, "TP/FP rule lists CSV");

  auto* sample = app.add_subcommand("sample", "Deduplicate per rule and split by time");
  sample->add_option("--input", o.sample.input)->required();
  sample->add_option("--stride", o.sample.stride)->capture_default_str();
  sample->add_option("--per-rule-cap", o.sample.cap)->capture_default_str();
  sample->add_option("--split-date", o.sample.split_date, "Alerts before this go to training");
  sample->add_option("--train-out", o.sample.train_out)->required();
  sample->add_option("--test-out", o.sample.test_out);

  auto* encode = app.add_subcommand("encode", "Encode labeled alerts into a feature matrix");
  encode->add_option("--input", o.encode.input)->required();
  encode->add_option("--output", o.encode.output)->required();
  encode->add_option("--profile", o.encode.profile, "core20 or full29")->capture_default_str();
  encode->add_option("--caps", o.encode.caps, "Scaling caps file");

  auto* select = app.add_subcommand("select", "Score features and keep the top k");
  select->add_option("--input", o.select.input)->required();
  select->add_option("--k", o.select.k)->capture_default_str();
  select->add_option("--scores", o.select.scores, "Per-feature score CSV");
  select->add_option("--output", o.select.output, "Reduced matrix CSV");

  auto* train = app.add_subcommand("train", "Train a random forest");
  train->add_option("--input", o.train.input)->required();
  train->add_option("--output", o.train.output)->required();
  train->add_option("--profile", o.train.profile)->capture_default_str();
  train->add_option("--trees", o.train.trees)->capture_default_str();
  train->add_option("--max-depth", o.train.depth)->capture_default_str();
  train->add_option("--min-samples-split", o.train.min_split)->capture_default_str();
  train->add_option("--max-features", o.train.max_features, "0 means floor(sqrt(width))")->capture_default_str();

  auto* evaluate = app.add_subcommand("evaluate", "Score a model on held-out data");
  evaluate->add_option("--model", o.evaluate.model)->required();
  evaluate->add_option("--test", o.evaluate.test)->required();
  evaluate->add_option("--train", o.evaluate.train, "Training matrix for k-fold validation");
  evaluate->add_option("--k", o.evaluate.k)->capture_default_str();
  evaluate->add_option("--threshold", o.evaluate.threshold)->capture_default_str();
  evaluate->add_option("--minutes-per-alert", o.evaluate.minutes)->capture_default_str();
  evaluate->add_option("--report", o.evaluate.report)->required();
  evaluate->add_option("--summary", o.evaluate.summary, "Metrics CSV");

  auto* explain = app.add_subcommand("explain", "Global and per-alert SHAP attributions");
  explain->add_option("--model", o.explain.model)->required();
  explain->add_option("--input", o.explain.input, "Feature matrix CSV")->required();
  explain->add_option("--output", o.explain.output)->required();
  explain->add_option("--per-alert", o.explain.per_alert, "NDJSON of per-row attributions");

  auto* predict = app.add_subcommand("predict", "Classify raw alerts");
  predict->add_option("--model", o.predict.model)->required();
  predict->add_option("--input", o.predict.input)->required();
  predict->add_option("--output", o.predict.output)->required();
  predict->add_option("--field-map", o.predict.field_map);
  predict->add_option("--caps", o.predict.caps);
  predict->add_option("--threshold", o.predict.threshold)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<CLI::App*, std::string (*)(const Options&)>> handlers = {
      {synth, run_synth},   {ingest, run_ingest},     {label, run_label},     {sample, run_sample},
      {encode, run_encode}, {select, run_select},     {train, run_train},     {evaluate, run_evaluate},
      {explain, run_explain}, {predict, run_predict}};
  for (const auto& [sub, handler] : handlers) {
    if (!sub->parsed()) continue;
    try {
      std::cout << handler(o) << '\n';
      return 0;
    } catch (const std::exception& e) {
      std::cerr << "alert-sift " << sub->get_name() << ": " << e.what() << '\n';
    }
    return 1;
  }
  return 1;
}
