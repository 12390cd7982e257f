#include "taskenc/core_data.hpp"

#include "taskenc/error.hpp"
#include "taskenc/text_io.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <unordered_set>

namespace taskenc {

namespace {

using json = nlohmann::json;

template <typename Map>
std::size_t lookup_or_fail(const Map& map, std::string_view key, const char* what) {
    auto it = map.find(std::string(key));
    if (it == map.end()) fail(ErrorKind::MissingEntity, std::string(what) + " '" + std::string(key) + "'");
    return it->second;
}

std::uint64_t byteswap64(std::uint64_t v) {
    v = ((v & 0x00000000FFFFFFFFULL) << 32) | ((v & 0xFFFFFFFF00000000ULL) >> 32);
    v = ((v & 0x0000FFFF0000FFFFULL) << 16) | ((v & 0xFFFF0000FFFF0000ULL) >> 16);
    v = ((v & 0x00FF00FF00FF00FFULL) << 8) | ((v & 0xFF00FF00FF00FF00ULL) >> 8);
    return v;
}

double decode_le(const unsigned char* bytes) {
    std::uint64_t raw;
    std::memcpy(&raw, bytes, sizeof raw);
    if constexpr (std::endian::native == std::endian::big) raw = byteswap64(raw);
    return std::bit_cast<double>(raw);
}

void encode_le(double value, unsigned char* bytes) {
    auto raw = std::bit_cast<std::uint64_t>(value);
    if constexpr (std::endian::native == std::endian::big) raw = byteswap64(raw);
    std::memcpy(bytes, &raw, sizeof raw);
}

template <typename T>
T meta_field(const json& meta, const char* key) {
    if (!meta.contains(key)) fail(ErrorKind::ParseError, std::string("meta.json missing '") + key + "'");
    try {
        return meta.at(key).get<T>();
    } catch (const json::exception& e) {
        fail(ErrorKind::ParseError, std::string("meta.json field '") + key + "': " + e.what());
    }
}

} // namespace

// ---------------------------------------------------------------------------
// ExperimentDesign

ExperimentDesign::ExperimentDesign(std::vector<Trial> trials, std::vector<std::string> words,
                                   std::vector<std::string> questions)
    : trials_(std::move(trials)), words_(std::move(words)), questions_(std::move(questions)) {
    const bool infer_words = words_.empty();
    const bool infer_questions = questions_.empty();
    for (std::size_t i = 0; i < words_.size(); ++i) {
        if (!word_lookup_.emplace(words_[i], i).second) fail(ErrorKind::DuplicateId, "word '" + words_[i] + "'");
    }
    for (std::size_t i = 0; i < questions_.size(); ++i) {
        if (!question_lookup_.emplace(questions_[i], i).second) {
            fail(ErrorKind::DuplicateId, "question '" + questions_[i] + "'");
        }
    }

    std::unordered_set<std::string> pairs;
    trial_word_.reserve(trials_.size());
    trial_question_.reserve(trials_.size());
    for (std::size_t r = 0; r < trials_.size(); ++r) {
        const Trial& t = trials_[r];
        if (!trial_lookup_.emplace(t.id, r).second) {
            fail(ErrorKind::DuplicateId, "trial id " + std::to_string(t.id));
        }
        if (infer_words && !word_lookup_.count(t.word)) {
            word_lookup_.emplace(t.word, words_.size());
            words_.push_back(t.word);
        }
        if (infer_questions && !question_lookup_.count(t.question)) {
            question_lookup_.emplace(t.question, questions_.size());
            questions_.push_back(t.question);
        }
        trial_word_.push_back(lookup_or_fail(word_lookup_, t.word, "word"));
        trial_question_.push_back(lookup_or_fail(question_lookup_, t.question, "question"));
        if (!pairs.insert(t.word + '\x1f' + t.question).second) {
            fail(ErrorKind::DuplicateId, "pair (" + t.word + ", " + t.question + ") appears twice");
        }
    }
}

ExperimentDesign ExperimentDesign::full_grid(std::vector<std::string> words,
                                             std::vector<std::string> questions) {
    std::vector<Trial> trials;
    trials.reserve(words.size() * questions.size());
    std::int64_t id = 0;
    for (const auto& q : questions) {
        for (const auto& w : words) trials.push_back(Trial{id++, w, q});
    }
    return ExperimentDesign(std::move(trials), std::move(words), std::move(questions));
}

std::size_t ExperimentDesign::word_index(std::string_view word) const {
    return lookup_or_fail(word_lookup_, word, "word");
}

std::size_t ExperimentDesign::question_index(std::string_view question) const {
    return lookup_or_fail(question_lookup_, question, "question");
}

std::optional<std::size_t> ExperimentDesign::row_of_trial(std::int64_t trial_id) const {
    auto it = trial_lookup_.find(trial_id);
    if (it == trial_lookup_.end()) return std::nullopt;
    return it->second;
}

ExperimentDesign ExperimentDesign::subset(std::span<const std::size_t> rows) const {
    std::vector<Trial> picked;
    picked.reserve(rows.size());
    for (std::size_t r : rows) picked.push_back(trials_.at(r));
    return ExperimentDesign(std::move(picked), words_, questions_);
}

// ---------------------------------------------------------------------------
// FeatureMatrix

std::string_view to_string(FeatureRole role) {
    return role == FeatureRole::Stimulus ? "stimulus" : "task";
}

FeatureMatrix::FeatureMatrix(std::vector<std::string> row_ids, std::vector<std::string> column_names,
                             Matrix values, FeatureRole role)
    : row_ids_(std::move(row_ids)), column_names_(std::move(column_names)), values_(std::move(values)),
      role_(role) {
    if (static_cast<Eigen::Index>(row_ids_.size()) != values_.rows() ||
        static_cast<Eigen::Index>(column_names_.size()) != values_.cols()) {
        fail(ErrorKind::ShapeMismatch, "feature matrix labels do not match value shape");
    }
    for (std::size_t i = 0; i < row_ids_.size(); ++i) {
        if (!lookup_.emplace(row_ids_[i], i).second) fail(ErrorKind::DuplicateId, "row id '" + row_ids_[i] + "'");
    }
    std::unordered_set<std::string> names;
    for (const auto& c : column_names_) {
        if (!names.insert(c).second) fail(ErrorKind::DuplicateId, "column '" + c + "'");
    }
    if (!all_finite(values_)) fail(ErrorKind::NonFiniteData, "feature matrix has non-finite values");
}

std::optional<std::size_t> FeatureMatrix::find_row(std::string_view id) const {
    auto it = lookup_.find(std::string(id));
    if (it == lookup_.end()) return std::nullopt;
    return it->second;
}

std::size_t FeatureMatrix::row_of(std::string_view id) const {
    auto found = find_row(id);
    if (!found) fail(ErrorKind::MissingEntity, std::string(to_string(role_)) + " row '" + std::string(id) + "'");
    return *found;
}

// ---------------------------------------------------------------------------
// BrainRecordings

BrainRecordings::BrainRecordings(Matrix values, std::size_t n_sensors, std::size_t n_windows,
                                 std::vector<std::string> sensor_labels, int window_ms,
                                 std::vector<std::int64_t> trial_ids)
    : values_(std::move(values)), n_sensors_(n_sensors), n_windows_(n_windows),
      sensor_labels_(std::move(sensor_labels)), window_ms_(window_ms), trial_ids_(std::move(trial_ids)) {
    if (values_.cols() != static_cast<Eigen::Index>(n_sensors_ * n_windows_) ||
        sensor_labels_.size() != n_sensors_ ||
        trial_ids_.size() != static_cast<std::size_t>(values_.rows())) {
        fail(ErrorKind::ShapeMismatch, "recording shape inconsistent with metadata");
    }
    if (window_ms_ <= 0) fail(ErrorKind::ShapeMismatch, "window_ms must be positive");
    std::unordered_set<std::int64_t> seen;
    for (auto id : trial_ids_) {
        if (!seen.insert(id).second) fail(ErrorKind::DuplicateId, "trial id " + std::to_string(id));
    }
    if (!all_finite(values_)) fail(ErrorKind::NonFiniteData, "recordings contain NaN or Inf");
}

// ---------------------------------------------------------------------------
// File formats

FeatureMatrix load_feature_matrix(const std::filesystem::path& path, FeatureRole role) {
    const auto lines = text::read_lines(path);
    if (lines.empty()) fail(ErrorKind::EmptyMatrix, path.string() + " has no header");
    const auto header = text::split_csv_line(lines.front());
    if (header.size() < 2) fail(ErrorKind::EmptyMatrix, path.string() + " declares no feature columns");
    const std::size_t n_cols = header.size() - 1;
    const std::size_t n_rows = lines.size() - 1;
    if (n_rows == 0) fail(ErrorKind::EmptyMatrix, path.string() + " has a header but no rows");

    std::vector<std::string> columns;
    for (std::size_t c = 1; c < header.size(); ++c) columns.push_back(text::trim(header[c]));

    std::vector<std::string> ids;
    ids.reserve(n_rows);
    Matrix values(static_cast<Eigen::Index>(n_rows), static_cast<Eigen::Index>(n_cols));
    for (std::size_t r = 0; r < n_rows; ++r) {
        const auto cells = text::split_csv_line(lines[r + 1]);
        if (cells.size() != header.size()) {
            fail(ErrorKind::ParseError, path.string() + " row " + std::to_string(r + 1) + ": expected " +
                                            std::to_string(header.size()) + " cells, got " +
                                            std::to_string(cells.size()));
        }
        ids.push_back(text::trim(cells[0]));
        for (std::size_t c = 0; c < n_cols; ++c) {
            double v = 0.0;
            if (!text::parse_double(cells[c + 1], v)) {
                fail(ErrorKind::ParseError, path.string() + " row " + std::to_string(r + 1) + ", col " +
                                                std::to_string(c + 1) + ": '" + cells[c + 1] + "' is not numeric");
            }
            values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
        }
    }
    return FeatureMatrix(std::move(ids), std::move(columns), std::move(values), role);
}

void save_feature_matrix(const std::filesystem::path& path, const FeatureMatrix& features) {
    std::string out;
    std::vector<std::string> header{"id"};
    header.insert(header.end(), features.column_names().begin(), features.column_names().end());
    out += text::join_csv(header) + "\n";
    for (Eigen::Index r = 0; r < features.rows(); ++r) {
        out += text::csv_field(features.row_ids()[static_cast<std::size_t>(r)]);
        for (Eigen::Index c = 0; c < features.cols(); ++c) {
            out += ',';
            out += text::format_double(features.values()(r, c));
        }
        out += '\n';
    }
    text::write_file(path, out);
}

ExperimentDesign load_design(const std::filesystem::path& path) {
    const auto lines = text::read_lines(path);
    if (lines.empty()) fail(ErrorKind::EmptyMatrix, path.string() + " is empty");
    const auto header = text::split_csv_line(lines.front());
    if (header.size() != 3 || text::trim(header[0]) != "trial_id" || text::trim(header[1]) != "word_id" ||
        text::trim(header[2]) != "question_id") {
        fail(ErrorKind::ParseError, path.string() + ": header must be trial_id,word_id,question_id");
    }
    std::vector<Trial> trials;
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto cells = text::split_csv_line(lines[r]);
        if (cells.size() != 3) fail(ErrorKind::ParseError, path.string() + " row " + std::to_string(r) + ": ragged");
        Trial t;
        if (!text::parse_int64(cells[0], t.id)) {
            fail(ErrorKind::ParseError, path.string() + " row " + std::to_string(r) + ", col 1: bad trial id");
        }
        t.word = text::trim(cells[1]);
        t.question = text::trim(cells[2]);
        trials.push_back(std::move(t));
    }
    if (trials.empty()) fail(ErrorKind::EmptyMatrix, path.string() + " has no trials");
    return ExperimentDesign(std::move(trials));
}

void save_design(const std::filesystem::path& path, const ExperimentDesign& design) {
    std::string out = "trial_id,word_id,question_id\n";
    for (const auto& t : design.trials()) {
        out += std::to_string(t.id) + "," + text::csv_field(t.word) + "," + text::csv_field(t.question) + "\n";
    }
    text::write_file(path, out);
}

BrainRecordings load_brain_recordings(const std::filesystem::path& dir) {
    json meta;
    try {
        meta = json::parse(text::read_file(dir / "meta.json"));
    } catch (const json::parse_error& e) {
        fail(ErrorKind::ParseError, (dir / "meta.json").string() + ": " + e.what());
    }
    const auto n_trials = meta_field<std::size_t>(meta, "n_trials");
    const auto n_sensors = meta_field<std::size_t>(meta, "n_sensors");
    const auto n_windows = meta_field<std::size_t>(meta, "n_windows");
    const auto window_ms = meta_field<int>(meta, "window_ms");
    auto labels = meta_field<std::vector<std::string>>(meta, "sensor_labels");
    auto trial_ids = meta_field<std::vector<std::int64_t>>(meta, "trial_ids");
    if (labels.size() != n_sensors) fail(ErrorKind::ShapeMismatch, "sensor_labels length != n_sensors");
    if (trial_ids.size() != n_trials) fail(ErrorKind::ShapeMismatch, "trial_ids length != n_trials");

    const std::string payload = text::read_file(dir / "data.f64le");
    const std::size_t cells = n_trials * n_sensors * n_windows;
    if (payload.size() != 8 * cells) {
        fail(ErrorKind::ShapeMismatch, "data.f64le has " + std::to_string(payload.size()) + " bytes, expected " +
                                           std::to_string(8 * cells));
    }
    const auto n_cols = static_cast<Eigen::Index>(n_sensors * n_windows);
    Matrix values(static_cast<Eigen::Index>(n_trials), n_cols);
    const auto* bytes = reinterpret_cast<const unsigned char*>(payload.data());
    for (std::size_t r = 0; r < n_trials; ++r) {
        for (Eigen::Index c = 0; c < n_cols; ++c) {
            const double v = decode_le(bytes + 8 * (r * static_cast<std::size_t>(n_cols) + static_cast<std::size_t>(c)));
            if (!std::isfinite(v)) {
                fail(ErrorKind::NonFiniteData, "non-finite value at trial " + std::to_string(r));
            }
            values(static_cast<Eigen::Index>(r), c) = v;
        }
    }
    return BrainRecordings(std::move(values), n_sensors, n_windows, std::move(labels), window_ms,
                           std::move(trial_ids));
}

void save_brain_recordings(const std::filesystem::path& dir, const BrainRecordings& brain) {
    json meta = {
        {"n_trials", brain.n_trials()},
        {"n_sensors", brain.n_sensors()},
        {"n_windows", brain.n_windows()},
        {"window_ms", brain.window_ms()},
        {"sensor_labels", brain.sensor_labels()},
        {"trial_ids", brain.trial_ids()},
    };
    text::write_file(dir / "meta.json", meta.dump(2) + "\n");

    const Matrix& v = brain.values();
    std::string payload(static_cast<std::size_t>(8 * v.size()), '\0');
    auto* bytes = reinterpret_cast<unsigned char*>(payload.data());
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
        for (Eigen::Index c = 0; c < v.cols(); ++c) encode_le(v(r, c), bytes + 8 * k++);
    }
    text::write_file(dir / "data.f64le", payload);
}

BrainRecordings downsample_time(const BrainRecordings& raw, std::size_t window) {
    if (window == 0) fail(ErrorKind::WindowError, "window must be positive");
    const std::size_t t_raw = raw.n_windows();
    if (t_raw % window != 0) {
        fail(ErrorKind::WindowError, std::to_string(t_raw) + " samples are not divisible by window " +
                                         std::to_string(window));
    }
    const std::size_t t_out = t_raw / window;
    const std::size_t n_sensors = raw.n_sensors();
    Matrix out(raw.values().rows(), static_cast<Eigen::Index>(n_sensors * t_out));
    for (Eigen::Index r = 0; r < raw.values().rows(); ++r) {
        for (std::size_t l = 0; l < n_sensors; ++l) {
            for (std::size_t w = 0; w < t_out; ++w) {
                double sum = 0.0;
                for (std::size_t k = 0; k < window; ++k) sum += raw.values()(r, raw.column(l, w * window + k));
                out(r, static_cast<Eigen::Index>(l * t_out + w)) = sum / static_cast<double>(window);
            }
        }
    }
    return BrainRecordings(std::move(out), n_sensors, t_out, raw.sensor_labels(),
                           raw.window_ms() * static_cast<int>(window), raw.trial_ids());
}

// ---------------------------------------------------------------------------
// z-scoring

ZScoreStats zscore_fit(const Matrix& values, std::span<const std::size_t> fit_rows) {
    if (fit_rows.empty()) fail(ErrorKind::EmptyFit, "z-score fit requires at least one row");
    const Eigen::Index cols = values.cols();
    ZScoreStats stats;
    stats.means = Vector::Zero(cols);
    stats.stds = Vector::Zero(cols);
    stats.constant.assign(static_cast<std::size_t>(cols), true);
    stats.fit_rows.assign(fit_rows.begin(), fit_rows.end());
    const double n = static_cast<double>(fit_rows.size());

    for (std::size_t r : fit_rows) {
        if (static_cast<Eigen::Index>(r) >= values.rows()) fail(ErrorKind::RangeError, "fit row out of range");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
        const double first = values(static_cast<Eigen::Index>(fit_rows.front()), c);
        double sum = 0.0;
        bool constant = true;
        for (std::size_t r : fit_rows) {
            const double v = values(static_cast<Eigen::Index>(r), c);
            sum += v;
            constant = constant && v == first;
        }
        const double mean = sum / n;
        double ss = 0.0;
        for (std::size_t r : fit_rows) {
            const double d = values(static_cast<Eigen::Index>(r), c) - mean;
            ss += d * d;
        }
        stats.means(c) = constant ? first : mean;
        stats.stds(c) = constant ? 0.0 : std::sqrt(ss / n);
        stats.constant[static_cast<std::size_t>(c)] = constant || stats.stds(c) == 0.0;
    }
    return stats;
}

ZScoreStats zscore_fit(const Matrix& values) {
    std::vector<std::size_t> rows(static_cast<std::size_t>(values.rows()));
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    return zscore_fit(values, rows);
}

Matrix zscore_apply(const Matrix& values, const ZScoreStats& stats) {
    if (values.cols() != stats.size()) {
        fail(ErrorKind::ShapeMismatch, "z-score stats have " + std::to_string(stats.size()) + " columns, data has " +
                                           std::to_string(values.cols()));
    }
    Matrix out(values.rows(), values.cols());
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
        if (stats.constant[static_cast<std::size_t>(c)]) {
            out.col(c).setZero();
        } else {
            out.col(c) = (values.col(c).array() - stats.means(c)) / stats.stds(c);
        }
    }
    return out;
}

Matrix zscore_invert(const Matrix& z, const ZScoreStats& stats) {
    if (z.cols() != stats.size()) fail(ErrorKind::ShapeMismatch, "z-score stats do not match column count");
    Matrix out(z.rows(), z.cols());
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
        if (stats.constant[static_cast<std::size_t>(c)]) {
            out.col(c).setConstant(stats.means(c));
        } else {
            out.col(c) = z.col(c).array() * stats.stds(c) + stats.means(c);
        }
    }
    return out;
}

AlignedRecordings align_to_design(const ExperimentDesign& design, const BrainRecordings& brain) {
    std::unordered_map<std::int64_t, std::size_t> recorded;
    for (std::size_t i = 0; i < brain.trial_ids().size(); ++i) {
        const auto id = brain.trial_ids()[i];
        if (!design.row_of_trial(id)) {
            fail(ErrorKind::MissingEntity, "recorded trial " + std::to_string(id) + " is not in the design");
        }
        recorded.emplace(id, i);
    }
    AlignedRecordings out;
    std::vector<std::size_t> keep_rows;
    std::vector<Eigen::Index> brain_rows;
    for (std::size_t r = 0; r < design.size(); ++r) {
        const auto id = design.trials()[r].id;
        auto it = recorded.find(id);
        if (it == recorded.end()) {
            out.rejected_trials.push_back(id);
            continue;
        }
        keep_rows.push_back(r);
        brain_rows.push_back(static_cast<Eigen::Index>(it->second));
    }
    out.design = design.subset(keep_rows);
    std::vector<std::int64_t> ids;
    ids.reserve(keep_rows.size());
    for (std::size_t r : keep_rows) ids.push_back(design.trials()[r].id);
    Matrix values = brain.values()(brain_rows, Eigen::all);
    out.brain = BrainRecordings(std::move(values), brain.n_sensors(), brain.n_windows(), brain.sensor_labels(),
                                brain.window_ms(), std::move(ids));
    return out;
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

} // namespace taskenc
