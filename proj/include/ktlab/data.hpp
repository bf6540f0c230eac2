#pragma once

// Interaction data: EdNet KT1 ingestion, learner filtering, windowing,
// one-hot encoding, the BKT synthetic generator and the canonical CSV format.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"
#include "ktlab/error.hpp"
#include "ktlab/numkit.hpp"
#include "ktlab/parallel.hpp"

namespace ktlab {

inline constexpr std::string_view kCanonicalHeader = "#ktlab-v1";
inline constexpr std::string_view kCanonicalColumns = "learner_id,skill_id,correct,order_key";
inline constexpr std::size_t kMinLearnerInteractions = 11;
inline constexpr std::size_t kTrainWindow = 200;
inline constexpr std::size_t kEvalWindow = 15;

struct InteractionRecord {
  std::string learner_id;
  std::size_t skill_id = 0;
  bool correct = false;
  std::int64_t order_key = 0;

  friend bool operator==(const InteractionRecord&, const InteractionRecord&) = default;
};

struct Step {
  std::size_t skill = 0;
  bool correct = false;

  friend bool operator==(const Step&, const Step&) = default;
};

struct LearnerSequence {
  std::string learner_id;
  std::vector<Step> steps;

  std::size_t size() const { return steps.size(); }
  friend bool operator==(const LearnerSequence&, const LearnerSequence&) = default;
};

struct EncodedSequence {
  std::vector<DenseVector> steps;
  std::size_t size() const { return steps.size(); }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      return out;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
}

template <class Int>
std::optional<Int> parse_int(std::string_view s) {
  Int v{};
  if (s.empty()) return std::nullopt;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<std::size_t> column(const std::vector<std::string_view>& header, std::string_view name) {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  return std::nullopt;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Question catalog

struct QuestionInfo {
  std::string correct_answer;
  std::vector<int> tags;  // sorted, never contains -1
  std::size_t skill_id = 0;
};

/// Maps each distinct sorted tag combination to a dense skill id.
class SkillMap {
 public:
  std::size_t size() const { return keys_.size(); }
  const std::vector<std::string>& keys() const { return keys_; }

  std::size_t intern(const std::string& key) {
    auto [it, inserted] = ids_.try_emplace(key, keys_.size());
    if (inserted) keys_.push_back(key);
    return it->second;
  }

  std::optional<std::size_t> find(const std::string& key) const {
    auto it = ids_.find(key);
    if (it == ids_.end()) return std::nullopt;
    return it->second;
  }

  /// Identity map "0".."M-1" used for synthetic corpora.
  static SkillMap identity(std::size_t m) {
    SkillMap map;
    for (std::size_t s = 0; s < m; ++s) map.intern(std::to_string(s));
    return map;
  }

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (std::size_t i = 0; i < keys_.size(); ++i) j[keys_[i]] = i;
    j["M"] = keys_.size();
    return j;
  }

  static SkillMap from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("M")) throw InputError("skill map: expected object with \"M\"");
    const auto m = j.at("M").get<std::size_t>();
    std::vector<std::string> keys(m);
    std::vector<bool> seen(m, false);
    for (const auto& [key, value] : j.items()) {
      if (key == "M") continue;
      const auto id = value.get<std::size_t>();
      if (id >= m || seen[id]) throw InputError("skill map: skill ids are not a bijection onto [0, M)");
      seen[id] = true;
      keys[id] = key;
    }
    for (bool s : seen)
      if (!s) throw InputError("skill map: missing skill id");
    SkillMap map;
    for (const auto& k : keys) map.intern(k);
    return map;
  }

  /// Stable hash of the serialized map; checkpoints carry it.
  std::string hash() const {
    char buf[17];
    const auto h = fnv1a64(to_json().dump());
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write skill map " + path.string());
    out << to_json().dump(2) << '\n';
  }

  static SkillMap load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open skill map " + path.string());
    try {
      return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw InputError("skill map " + path.string() + ": " + e.what());
    }
  }

 private:
  std::unordered_map<std::string, std::size_t> ids_;
  std::vector<std::string> keys_;
};

struct QuestionCatalog {
  std::unordered_map<std::string, QuestionInfo> questions;
  SkillMap skills;
  std::size_t excluded_untagged = 0;

  std::size_t num_skills() const { return skills.size(); }

  const QuestionInfo* find(std::string_view question_id) const {
    auto it = questions.find(std::string(question_id));
    return it == questions.end() ? nullptr : &it->second;
  }
};

inline std::string tag_key(const std::vector<int>& sorted_tags) {
  std::string key;
  for (std::size_t i = 0; i < sorted_tags.size(); ++i) {
    if (i) key += ';';
    key += std::to_string(sorted_tags[i]);
  }
  return key;
}

/// Reads the KT1 question metadata. Questions whose only tag is -1 are left
/// out; every distinct sorted tag set becomes one skill, numbered in order of
/// first appearance.
inline QuestionCatalog load_question_catalog(std::istream& in, const std::string& name = "<catalog>") {
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line)) throw InputError(name + ": empty catalog file");
  const auto header = detail::split(line, ',');
  const auto qcol = detail::column(header, "question_id");
  const auto acol = detail::column(header, "correct_answer");
  const auto tcol = detail::column(header, "tags");
  if (!qcol || !acol || !tcol)
    throw InputError(where(name, lineno) + ": catalog header needs question_id, correct_answer, tags");

  QuestionCatalog cat;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto cols = detail::split(line, ',');
    if (cols.size() != header.size())
      throw InputError(where(name, lineno) + ": expected " + std::to_string(header.size()) + " columns, got " +
                       std::to_string(cols.size()));
    const std::string qid(cols[*qcol]);
    if (qid.empty()) throw InputError(where(name, lineno) + ": empty question_id");

    std::vector<int> tags;
    for (auto t : detail::split(cols[*tcol], ';')) {
      const auto v = detail::parse_int<int>(t);
      if (!v) throw InputError(where(name, lineno) + ": unparseable tag '" + std::string(t) + "'");
      if (*v != -1) tags.push_back(*v);
    }
    if (tags.empty()) {
      ++cat.excluded_untagged;
      continue;
    }
    std::sort(tags.begin(), tags.end());
    tags.erase(std::unique(tags.begin(), tags.end()), tags.end());

    QuestionInfo info;
    info.correct_answer = std::string(cols[*acol]);
    info.skill_id = cat.skills.intern(tag_key(tags));
    info.tags = std::move(tags);
    if (!cat.questions.emplace(qid, std::move(info)).second)
      throw InputError(where(name, lineno) + ": duplicate question_id " + qid);
  }
  return cat;
}

inline QuestionCatalog load_question_catalog(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open question catalog " + path.string());
  return load_question_catalog(in, path.string());
}

// ---------------------------------------------------------------------------
// KT1 ingestion

struct IngestStats {
  std::size_t files = 0;
  std::size_t rows_read = 0;
  std::size_t rows_emitted = 0;
  std::size_t skipped_unknown_question = 0;
  std::size_t skipped_malformed = 0;
  std::size_t learners_seen = 0;
  std::size_t learners_removed = 0;
  std::size_t interactions_removed = 0;

  std::size_t rows_skipped() const { return skipped_unknown_question + skipped_malformed; }

  nlohmann::json to_json() const {
    return {{"files", files},
            {"rows_read", rows_read},
            {"rows_emitted", rows_emitted},
            {"rows_skipped", rows_skipped()},
            {"skipped_unknown_question", skipped_unknown_question},
            {"skipped_malformed", skipped_malformed},
            {"learners_seen", learners_seen},
            {"learners_removed", learners_removed},
            {"interactions_removed", interactions_removed}};
  }
};

/// Parses one KT1 user file. Records come back ordered by timestamp with
/// equal timestamps kept in file order.
inline std::vector<InteractionRecord> ingest_user_file(std::istream& in, const std::string& learner_id,
                                                       const QuestionCatalog& catalog, IngestStats& stats,
                                                       const std::string& name = "<user file>") {
  std::string line;
  if (!std::getline(in, line)) throw InputError(name + ": empty user file");
  const auto header = detail::split(line, ',');
  const auto tcol = detail::column(header, "timestamp");
  const auto qcol = detail::column(header, "question_id");
  const auto acol = detail::column(header, "user_answer");
  if (!tcol || !qcol || !acol) throw InputError(where(name, 1) + ": header needs timestamp, question_id, user_answer");

  std::vector<InteractionRecord> out;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    ++stats.rows_read;
    const auto cols = detail::split(line, ',');
    if (cols.size() != header.size()) {
      ++stats.skipped_malformed;
      continue;
    }
    const auto ts = detail::parse_int<std::int64_t>(cols[*tcol]);
    if (!ts || cols[*qcol].empty() || cols[*acol].empty()) {
      ++stats.skipped_malformed;
      continue;
    }
    const QuestionInfo* q = catalog.find(cols[*qcol]);
    if (!q) {
      ++stats.skipped_unknown_question;
      continue;
    }
    out.push_back({learner_id, q->skill_id, cols[*acol] == q->correct_answer, *ts});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const InteractionRecord& a, const InteractionRecord& b) { return a.order_key < b.order_key; });
  stats.rows_emitted += out.size();
  return out;
}

/// Ingests every u<id>.csv under `user_dir`. Output is sorted by
/// (learner_id, order_key), ties in source row order.
inline std::vector<InteractionRecord> ingest_ednet_kt1(const std::filesystem::path& user_dir,
                                                       const QuestionCatalog& catalog, IngestStats& stats,
                                                       std::size_t jobs = 1) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(user_dir)) throw InputError("KT1 user directory not found: " + user_dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(user_dir)) {
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() && name.size() > 5 && name.front() == 'u' && entry.path().extension() == ".csv")
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.stem().string() < b.stem().string(); });

  std::vector<std::vector<InteractionRecord>> per_file(files.size());
  std::vector<IngestStats> per_stats(files.size());
  parallel_for(files.size(), jobs, [&](std::size_t i) {
    std::ifstream in(files[i], std::ios::binary);
    if (!in) throw InputError("cannot open " + files[i].string());
    per_file[i] = ingest_user_file(in, files[i].stem().string(), catalog, per_stats[i], files[i].string());
  });

  std::vector<InteractionRecord> all;
  for (std::size_t i = 0; i < files.size(); ++i) {
    stats.files += 1;
    stats.rows_read += per_stats[i].rows_read;
    stats.rows_emitted += per_stats[i].rows_emitted;
    stats.skipped_unknown_question += per_stats[i].skipped_unknown_question;
    stats.skipped_malformed += per_stats[i].skipped_malformed;
    all.insert(all.end(), std::make_move_iterator(per_file[i].begin()), std::make_move_iterator(per_file[i].end()));
  }
  return all;
}

// ---------------------------------------------------------------------------
// Grouping and filtering

struct LearnerRecords {
  std::string learner_id;
  std::vector<InteractionRecord> records;
};

/// Groups records sorted by (learner_id, order_key) into per-learner runs.
/// Ordering within a learner is preserved.
inline std::vector<LearnerRecords> group_by_learner(std::vector<InteractionRecord> records) {
  std::stable_sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
    if (a.learner_id != b.learner_id) return a.learner_id < b.learner_id;
    return a.order_key < b.order_key;
  });
  std::vector<LearnerRecords> groups;
  for (auto& r : records) {
    if (groups.empty() || groups.back().learner_id != r.learner_id) groups.push_back({r.learner_id, {}});
    groups.back().records.push_back(std::move(r));
  }
  return groups;
}

/// Drops learners with 10 or fewer interactions.
inline std::vector<LearnerRecords> filter_learners(std::vector<LearnerRecords> groups, IngestStats* stats = nullptr) {
  std::vector<LearnerRecords> kept;
  for (auto& g : groups) {
    if (g.records.size() >= kMinLearnerInteractions) {
      kept.push_back(std::move(g));
    } else if (stats) {
      ++stats->learners_removed;
      stats->interactions_removed += g.records.size();
    }
  }
  return kept;
}

inline std::vector<InteractionRecord> flatten(const std::vector<LearnerRecords>& groups) {
  std::vector<InteractionRecord> out;
  for (const auto& g : groups) out.insert(out.end(), g.records.begin(), g.records.end());
  return out;
}

inline std::vector<LearnerSequence> to_sequences(const std::vector<LearnerRecords>& groups) {
  std::vector<LearnerSequence> out;
  out.reserve(groups.size());
  for (const auto& g : groups) {
    LearnerSequence seq{g.learner_id, {}};
    seq.steps.reserve(g.records.size());
    for (const auto& r : g.records) seq.steps.push_back({r.skill_id, r.correct});
    out.push_back(std::move(seq));
  }
  return out;
}

inline std::vector<InteractionRecord> to_records(const std::vector<LearnerSequence>& seqs) {
  std::vector<InteractionRecord> out;
  for (const auto& s : seqs)
    for (std::size_t t = 0; t < s.steps.size(); ++t)
      out.push_back({s.learner_id, s.steps[t].skill, s.steps[t].correct, static_cast<std::int64_t>(t)});
  return out;
}

// ---------------------------------------------------------------------------
// Windowing

/// Consecutive non-overlapping windows of `window` steps; a shorter tail is
/// kept only when it has at least `min_tail` steps.
inline std::vector<LearnerSequence> window_train(const LearnerSequence& seq, std::size_t window = kTrainWindow,
                                                 std::size_t min_tail = 2) {
  if (window < 2) throw std::invalid_argument("window_train: window must be >= 2");
  std::vector<LearnerSequence> out;
  for (std::size_t start = 0; start < seq.steps.size(); start += window) {
    const std::size_t len = std::min(window, seq.steps.size() - start);
    if (len < window && len < min_tail) break;
    out.push_back({seq.learner_id, {seq.steps.begin() + start, seq.steps.begin() + start + len}});
  }
  return out;
}

/// Consecutive windows of exactly 15 steps; any remainder is dropped.
inline std::vector<LearnerSequence> window_eval(const LearnerSequence& seq) {
  std::vector<LearnerSequence> out;
  for (std::size_t start = 0; start + kEvalWindow <= seq.steps.size(); start += kEvalWindow)
    out.push_back({seq.learner_id, {seq.steps.begin() + start, seq.steps.begin() + start + kEvalWindow}});
  return out;
}

// ---------------------------------------------------------------------------
// Encoding

/// Index of the active one-hot component: s for a correct answer, M + s otherwise.
inline std::size_t encode_index(const Step& step, std::size_t num_skills) {
  if (step.skill >= num_skills)
    throw std::out_of_range("encode: skill " + std::to_string(step.skill) + " outside [0, " +
                            std::to_string(num_skills) + ")");
  return step.correct ? step.skill : num_skills + step.skill;
}

inline Step decode_index(std::size_t index, std::size_t num_skills) {
  if (index >= 2 * num_skills) throw std::out_of_range("decode: index outside [0, 2M)");
  return index < num_skills ? Step{index, true} : Step{index - num_skills, false};
}

inline EncodedSequence encode(std::span<const Step> steps, std::size_t num_skills) {
  EncodedSequence enc;
  enc.steps.reserve(steps.size());
  for (const auto& s : steps) {
    DenseVector x(2 * num_skills);
    x[encode_index(s, num_skills)] = 1.0;
    enc.steps.push_back(std::move(x));
  }
  return enc;
}

inline EncodedSequence encode(const LearnerSequence& seq, std::size_t num_skills) {
  return encode(std::span<const Step>(seq.steps), num_skills);
}

// ---------------------------------------------------------------------------
// Synthetic BKT learners

struct BktSkillParams {
  double p_init = 0.3;
  double p_transit = 0.1;
  double p_guess = 0.2;
  double p_slip = 0.1;

  /// Throws InputError unless every probability is in [0,1] and a learned
  /// skill is strictly more likely to be answered correctly than an unlearned
  /// one (p_guess < 1 - p_slip).
  void validate() const {
    for (auto [name, p] : {std::pair{"p_init", p_init}, std::pair{"p_transit", p_transit},
                           std::pair{"p_guess", p_guess}, std::pair{"p_slip", p_slip}}) {
      if (!(p >= 0.0 && p <= 1.0)) throw InputError(std::string("BKT ") + name + " outside [0,1]");
    }
    if (p_guess + p_slip >= 1.0) throw InputError("BKT parameters not identifiable: p_guess + p_slip >= 1");
  }
};

struct LengthRange {
  std::size_t min = 20;
  std::size_t max = 100;
};

/// Samples learners from independent per-skill BKT processes. Each learner
/// draws a length uniformly from `lengths`, then at every step a uniformly
/// random skill; the answer is emitted from the current mastery state and the
/// state then transitions.
inline std::vector<LearnerSequence> synth_generate(SeededRng& rng, std::size_t n_learners, std::size_t num_skills,
                                                   LengthRange lengths, const std::vector<BktSkillParams>& params) {
  if (num_skills == 0) throw InputError("synth: need at least one skill");
  if (lengths.min < 1 || lengths.min > lengths.max) throw InputError("synth: invalid length range");
  if (params.size() != num_skills) throw InputError("synth: need one BKT parameter set per skill");
  for (const auto& p : params) p.validate();

  const int width = static_cast<int>(std::to_string(n_learners).size());
  std::vector<LearnerSequence> out;
  out.reserve(n_learners);
  for (std::size_t n = 0; n < n_learners; ++n) {
    std::string id = std::to_string(n);
    id = "s" + std::string(static_cast<std::size_t>(width) - id.size(), '0') + id;
    LearnerSequence seq{std::move(id), {}};

    std::vector<bool> mastered(num_skills);
    for (std::size_t s = 0; s < num_skills; ++s) mastered[s] = rng.bernoulli(params[s].p_init);

    const auto len = static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(lengths.min), static_cast<std::int64_t>(lengths.max)));
    seq.steps.reserve(len);
    for (std::size_t t = 0; t < len; ++t) {
      const auto s = static_cast<std::size_t>(rng.below(num_skills));
      const auto& p = params[s];
      const bool correct = rng.bernoulli(mastered[s] ? 1.0 - p.p_slip : p.p_guess);
      if (!mastered[s]) mastered[s] = rng.bernoulli(p.p_transit);
      seq.steps.push_back({s, correct});
    }
    out.push_back(std::move(seq));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Canonical format

inline void write_canonical(std::ostream& out, std::vector<InteractionRecord> records) {
  std::stable_sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
    if (a.learner_id != b.learner_id) return a.learner_id < b.learner_id;
    return a.order_key < b.order_key;
  });
  out << kCanonicalHeader << '\n' << kCanonicalColumns << '\n';
  for (const auto& r : records) {
    if (r.learner_id.empty() || r.learner_id.find_first_of(",\r\n") != std::string::npos)
      throw InputError("canonical: learner id '" + r.learner_id + "' cannot be written");
    out << r.learner_id << ',' << r.skill_id << ',' << (r.correct ? 1 : 0) << ',' << r.order_key << '\n';
  }
}

inline void write_canonical(const std::filesystem::path& path, const std::vector<InteractionRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  write_canonical(out, records);
}

inline std::vector<InteractionRecord> read_canonical(std::istream& in, const std::string& name = "<canonical>") {
  std::string line;
  if (!std::getline(in, line)) throw InputError(where(name, 1) + ": missing version header");
  const auto version = detail::trim(line);
  if (version != kCanonicalHeader)
    throw InputError(where(name, 1) + ": unsupported schema version '" + std::string(version) + "', expected " +
                     std::string(kCanonicalHeader));
  if (!std::getline(in, line) || detail::trim(line) != kCanonicalColumns)
    throw InputError(where(name, 2) + ": expected column header " + std::string(kCanonicalColumns));

  std::vector<InteractionRecord> records;
  std::size_t lineno = 2;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto cols = detail::split(line, ',');
    if (cols.size() != 4) throw InputError(where(name, lineno) + ": expected 4 columns");
    const auto skill = detail::parse_int<std::size_t>(cols[1]);
    const auto key = detail::parse_int<std::int64_t>(cols[3]);
    if (cols[0].empty() || !skill || !key || (cols[2] != "0" && cols[2] != "1"))
      throw InputError(where(name, lineno) + ": malformed record");
    InteractionRecord r{std::string(cols[0]), *skill, cols[2] == "1", *key};
    if (!records.empty()) {
      const auto& prev = records.back();
      if (prev.learner_id > r.learner_id || (prev.learner_id == r.learner_id && prev.order_key > r.order_key))
        throw InputError(where(name, lineno) + ": rows not sorted by (learner_id, order_key)");
    }
    records.push_back(std::move(r));
  }
  return records;
}

inline std::vector<InteractionRecord> read_canonical(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open canonical file " + path.string());
  return read_canonical(in, path.string());
}

// ---------------------------------------------------------------------------
// Learner-level split

struct LearnerSplit {
  std::vector<LearnerSequence> train;
  std::vector<LearnerSequence> test;
};

/// Seeded split by learner (never by window). Both halves keep learner-id order.
inline LearnerSplit split_learners(std::vector<LearnerSequence> learners, double train_ratio, std::uint64_t seed) {
  if (!(train_ratio > 0.0 && train_ratio < 1.0)) throw InputError("split ratio must be in (0,1)");
  std::sort(learners.begin(), learners.end(),
            [](const auto& a, const auto& b) { return a.learner_id < b.learner_id; });
  std::vector<std::size_t> order(learners.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  SeededRng rng(derive_seed(seed, "split"));
  rng.shuffle(order);
  const auto n_train = static_cast<std::size_t>(train_ratio * static_cast<double>(learners.size()));
  std::vector<bool> is_train(learners.size(), false);
  for (std::size_t i = 0; i < n_train; ++i) is_train[order[i]] = true;
  LearnerSplit split;
  for (std::size_t i = 0; i < learners.size(); ++i)
    (is_train[i] ? split.train : split.test).push_back(std::move(learners[i]));
  return split;
}

}  // namespace ktlab
