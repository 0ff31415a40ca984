#include "tgrpo/report.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>
#include <stdexcept>
#include <type_traits>

#include "tgrpo/errors.hpp"

namespace tgrpo {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

struct Field {
  std::string section;   // empty for top-level keys
  std::string key;
  std::function<ordered_json(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const json&)> set;
};

template <class T>
T convert(const json& v, const std::string& name) {
  bool ok = false;
  if constexpr (std::is_same_v<T, bool>)
    ok = v.is_boolean();
  else if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>)
    ok = v.is_number_unsigned();
  else if constexpr (std::is_integral_v<T>)
    ok = v.is_number_integer();
  else if constexpr (std::is_floating_point_v<T>)
    ok = v.is_number();
  else
    ok = true;
  if (!ok) throw ConfigError("config key '" + name + "' has the wrong type");
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + name + "' has the wrong type");
  }
}

template <class T>
Field member(std::string section, std::string key, T TrainConfig::*m) {
  const std::string name = section + "." + key;
  return {section, key, [m](const TrainConfig& c) { return ordered_json(c.*m); },
          [m, name](TrainConfig& c, const json& v) { c.*m = convert<T>(v, name); }};
}

template <class T>
Field bank_member(std::string key, T BankSpec::*m) {
  const std::string name = "bank." + key;
  return {"bank", key, [m](const TrainConfig& c) { return ordered_json(c.bank.*m); },
          [m, name](TrainConfig& c, const json& v) { c.bank.*m = convert<T>(v, name); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back({"", "seed", [](const TrainConfig& c) { return ordered_json(c.seed); },
                 [](TrainConfig& c, const json& v) {
                   c.seed = convert<std::uint64_t>(v, "seed");
                 }});
    f.push_back({"method", "mode",
                 [](const TrainConfig& c) { return ordered_json(std::string(mode_name(c.mode))); },
                 [](TrainConfig& c, const json& v) {
                   c.mode = parse_mode(convert<std::string>(v, "method.mode"));
                 }});
    f.push_back(member("method", "dynamic_rollout", &TrainConfig::dynamic_rollout));
    f.push_back({"method", "std_estimator",
                 [](const TrainConfig& c) {
                   return ordered_json(c.std_estimator == StdEstimator::population
                                           ? "population" : "sample");
                 },
                 [](TrainConfig& c, const json& v) {
                   const auto s = convert<std::string>(v, "method.std_estimator");
                   if (s == "population")
                     c.std_estimator = StdEstimator::population;
                   else if (s == "sample")
                     c.std_estimator = StdEstimator::sample;
                   else
                     throw ConfigError("method.std_estimator must be population or sample");
                 }});
    f.push_back(member("method", "update_at_sampling_temperature",
                       &TrainConfig::update_at_sampling_temperature));
    f.push_back(member("optimization", "batch_size", &TrainConfig::batch_size));
    f.push_back(member("optimization", "group_size", &TrainConfig::group_size));
    f.push_back(member("optimization", "epochs", &TrainConfig::epochs));
    f.push_back(member("optimization", "learning_rate", &TrainConfig::learning_rate));
    f.push_back(member("optimization", "epsilon", &TrainConfig::epsilon));
    f.push_back(member("optimization", "entropy_coef", &TrainConfig::entropy_coef));
    f.push_back(member("temperature", "eta", &TrainConfig::eta));
    f.push_back(member("temperature", "anneal_start_fraction",
                       &TrainConfig::anneal_start_fraction));
    f.push_back(member("temperature", "tau_init", &TrainConfig::tau_init));
    f.push_back(member("temperature", "tau_min", &TrainConfig::tau_min));
    f.push_back(member("temperature", "tau_max", &TrainConfig::tau_max));
    f.push_back(member("budget", "widen_step", &TrainConfig::widen_step));
    f.push_back(member("budget", "g_min_floor", &TrainConfig::g_min_floor));
    f.push_back(member("budget", "g_max_ceiling", &TrainConfig::g_max_ceiling));
    f.push_back(member("budget", "dapo_resample_factor", &TrainConfig::dapo_resample_factor));
    f.push_back(bank_member("size", &BankSpec::size));
    f.push_back(bank_member("vocab_size", &BankSpec::vocab_size));
    f.push_back(bank_member("answer_length", &BankSpec::answer_length));
    f.push_back(bank_member("num_answers", &BankSpec::num_answers));
    f.push_back(bank_member("num_contexts", &BankSpec::num_contexts));
    f.push_back(bank_member("branch_candidates", &BankSpec::branch_candidates));
    f.push_back(bank_member("candidate_skew", &BankSpec::candidate_skew));
    f.push_back(bank_member("outlier_logit", &BankSpec::outlier_logit));
    f.push_back(bank_member("runner_up_logit", &BankSpec::runner_up_logit));
    f.push_back(bank_member("noise_std", &BankSpec::noise_std));
    f.push_back(bank_member("difficulty_min", &BankSpec::difficulty_min));
    f.push_back(bank_member("difficulty_max", &BankSpec::difficulty_max));
    f.push_back({"bank", "easy_cap",
                 [](const TrainConfig& c) {
                   return c.easy_cap ? ordered_json(*c.easy_cap) : ordered_json(nullptr);
                 },
                 [](TrainConfig& c, const json& v) {
                   if (v.is_null())
                     c.easy_cap.reset();
                   else
                     c.easy_cap = convert<std::size_t>(v, "bank.easy_cap");
                 }});
    f.push_back(member("bank", "probe_samples", &TrainConfig::probe_samples));
    f.push_back(member("bank", "eval_size", &TrainConfig::eval_bank_size));
    f.push_back(member("evaluation", "interval", &TrainConfig::eval_interval));
    f.push_back(member("evaluation", "samples", &TrainConfig::eval_samples));
    f.push_back(member("evaluation", "k", &TrainConfig::eval_k));
    return f;
  }();
  return table;
}

const Field* find_field(const std::string& section, const std::string& key) {
  for (const auto& f : fields())
    if (f.section == section && f.key == key) return &f;
  return nullptr;
}

bool is_section(const std::string& name) {
  for (const auto& f : fields())
    if (!f.section.empty() && f.section == name) return true;
  return false;
}

}  // namespace

const std::vector<std::string>& trace_columns() {
  static const std::vector<std::string> cols = {
      "schema_version", "step",           "epoch",
      "tau",            "entropy",        "target_entropy",
      "mean_reward",    "frac_all_incorrect", "frac_all_correct",
      "min_budget",     "max_budget",     "rollouts_consumed",
      "g_min",          "g_max"};
  return cols;
}

TrainConfig config_from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  TrainConfig c;
  for (const auto& [name, value] : doc.items()) {
    if (const Field* f = find_field("", name)) {
      f->set(c, value);
      continue;
    }
    if (!is_section(name)) throw ConfigError("unknown config key '" + name + "'");
    if (!value.is_object()) throw ConfigError("config section '" + name + "' must be an object");
    for (const auto& [key, v] : value.items()) {
      const Field* f = find_field(name, key);
      if (!f) throw ConfigError("unknown config key '" + name + "." + key + "'");
      f->set(c, v);
    }
  }
  c.validate();
  return c;
}

ordered_json config_to_json(const TrainConfig& config) {
  ordered_json doc = ordered_json::object();
  for (const auto& f : fields()) {
    if (f.section.empty())
      doc[f.key] = f.get(config);
    else
      doc[f.section][f.key] = f.get(config);
  }
  return doc;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
  return config_from_json(doc);
}

std::string format_number(double value) { return ordered_json(value).dump(); }

ordered_json trace_row(const TraceRecord& r) {
  ordered_json j;
  j["schema_version"] = kTraceSchemaVersion;
  j["step"] = r.step;
  j["epoch"] = r.epoch;
  j["tau"] = r.tau;
  j["entropy"] = r.entropy;
  j["target_entropy"] = r.target_entropy;
  j["mean_reward"] = r.mean_reward;
  j["frac_all_incorrect"] = r.frac_all_incorrect;
  j["frac_all_correct"] = r.frac_all_correct;
  j["min_budget"] = r.min_budget;
  j["max_budget"] = r.max_budget;
  j["rollouts_consumed"] = r.rollouts_consumed;
  j["g_min"] = r.g_min;
  j["g_max"] = r.g_max;
  return j;
}

std::string trace_jsonl(const std::vector<TraceRecord>& trace) {
  std::string out;
  for (const auto& r : trace) out += trace_row(r).dump() + '\n';
  return out;
}

std::string trace_csv(const std::vector<TraceRecord>& trace) {
  std::string out;
  const auto& cols = trace_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
  out += '\n';
  for (const auto& r : trace) {
    const ordered_json row = trace_row(r);
    for (std::size_t i = 0; i < cols.size(); ++i)
      out += (i ? "," : "") + row.at(cols[i]).dump();
    out += '\n';
  }
  return out;
}

ordered_json pass_table_json(const PassAtKTable& table) {
  ordered_json j;
  j["step"] = table.step;
  j["n_samples"] = table.n_samples;
  j["questions"] = table.correct_counts.size();
  ordered_json pass = ordered_json::object();
  for (std::size_t i = 0; i < table.k_values.size(); ++i)
    pass["pass@" + std::to_string(table.k_values[i])] = table.pass[i];
  j["pass"] = pass;
  return j;
}

ordered_json summary_json(const RunManifest& manifest, const TrainResult& result) {
  ordered_json j;
  j["schema_version"] = kTraceSchemaVersion;
  ordered_json m;
  m["seed"] = manifest.config.seed;
  m["mode"] = std::string(mode_name(manifest.config.mode));
  m["dynamic_rollout"] = manifest.config.dynamic_rollout;
  m["started_at"] = manifest.started_at;
  m["finished_at"] = manifest.finished_at;
  ordered_json paths = ordered_json::array();
  for (const auto& p : manifest.artifacts) paths.push_back(p.string());
  m["artifacts"] = paths;
  m["config"] = config_to_json(manifest.config);
  j["manifest"] = m;
  j["train_bank_size"] = result.train_bank_size;
  j["t_max"] = result.t_max;
  j["h_init"] = result.h_init ? ordered_json(*result.h_init) : ordered_json(nullptr);
  j["skipped_steps"] = result.skipped_steps;
  ordered_json evals = ordered_json::array();
  for (const auto& e : result.evals) evals.push_back(pass_table_json(e));
  j["evaluations"] = evals;
  j["final"] = result.evals.empty() ? ordered_json(nullptr)
                                    : pass_table_json(result.evals.back());
  return j;
}

std::string aggregate_csv(const std::vector<std::vector<TraceRecord>>& traces) {
  if (traces.empty()) throw std::domain_error("no traces to aggregate");
  const std::size_t steps = traces.front().size();
  for (const auto& t : traces)
    if (t.size() != steps) throw std::domain_error("traces differ in length");
  const auto& cols = trace_columns();
  std::vector<std::string> stats(cols.begin() + 3, cols.end());   // after epoch

  std::string out = "step,epoch,runs";
  for (const auto& c : stats) out += "," + c + "_mean," + c + "_std";
  out += '\n';
  const double n = static_cast<double>(traces.size());
  for (std::size_t s = 0; s < steps; ++s) {
    const auto first = trace_row(traces.front()[s]);
    out += first["step"].dump() + "," + first["epoch"].dump() + "," +
           std::to_string(traces.size());
    for (const auto& c : stats) {
      double sum = 0.0, sq = 0.0;
      std::vector<double> xs;
      for (const auto& t : traces) xs.push_back(trace_row(t[s])[c].get<double>());
      for (double x : xs) sum += x;
      const double mean = sum / n;
      for (double x : xs) sq += (x - mean) * (x - mean);
      const double sd = traces.size() > 1 ? std::sqrt(sq / (n - 1.0)) : 0.0;
      out += "," + format_number(mean) + "," + format_number(sd);
    }
    out += '\n';
  }
  return out;
}

ordered_json policy_json(const PolicyTable& policy) {
  ordered_json j;
  j["slots"] = policy.slots();
  j["length"] = policy.length();
  j["vocab"] = policy.vocab();
  j["logits"] = std::vector<double>(policy.data().begin(), policy.data().end());
  return j;
}

PolicyTable policy_from_json(const json& doc) {
  try {
    PolicyTable p(doc.at("slots").get<std::size_t>(), doc.at("length").get<std::size_t>(),
                  doc.at("vocab").get<std::size_t>());
    const auto logits = doc.at("logits").get<std::vector<double>>();
    if (logits.size() != p.data().size())
      throw std::runtime_error("logit count does not match the table shape");
    std::copy(logits.begin(), logits.end(), p.data().begin());
    return p;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("malformed policy file: ") + e.what());
  }
}

void write_atomically(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) {
      out.close();
      std::filesystem::remove(tmp);
      throw std::runtime_error("write failed for " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace tgrpo
