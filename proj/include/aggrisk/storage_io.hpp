#pragma once

// Persistence for every artifact. Formats (all integers little-endian):
//
//   YET (binary)    "YET1" | trial_count u64 | events_per_trial u32 | seed u64
//                   then trial_count * events_per_trial records of
//                   event_id u32 | timestamp f64, trials in id order.
//   ELT (text)      "event_id,loss" header, then one "event_id,loss" line per
//                   record in ascending event id. File name elt_<id>.csv.
//   LLT/YLT (text)  "trial_id,loss" header, then one line per trial in
//                   ascending, dense trial id starting at 1.
//   Portfolio       JSON: programs -> layers -> covered_elts, participations,
//                   terms; an unlimited limit is the string "inf".
//
// Floats are written as the shortest decimal that reads back to the same
// bits, so every write/read pair is a bit-exact round trip.

#include <aggrisk/core_model.hpp>
#include <aggrisk/error.hpp>
#include <aggrisk/input_split.hpp>

#include <json.hpp>

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace aggrisk::io {

namespace fs = std::filesystem;

inline constexpr std::array<char, 4> kYetMagic = {'Y', 'E', 'T', '1'};
inline constexpr std::size_t kYetHeaderBytes = 4 + 8 + 4 + 8;
inline constexpr std::size_t kYetRecordBytes = 4 + 8;

struct YetFileHeader {
  std::array<char, 4> magic = kYetMagic;
  std::uint64_t trial_count = 0;
  std::uint32_t events_per_trial = 0;
  std::uint64_t seed = 0;  // 0 when unknown
};

inline std::uintmax_t yet_file_size(std::uint64_t trials, std::uint32_t events_per_trial) {
  return kYetHeaderBytes + trials * events_per_trial * kYetRecordBytes;
}

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

inline File open(const fs::path& p, const char* mode) {
  File f(std::fopen(p.c_str(), mode));
  if (!f) {
    throw IoError("cannot open " + p.string() + ": " + std::strerror(errno));
  }
  return f;
}

template <typename T>
void put_le(unsigned char* dst, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(dst, &value, sizeof(T));
  } else {
    unsigned char tmp[sizeof(T)];
    std::memcpy(tmp, &value, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T); ++i) dst[i] = tmp[sizeof(T) - 1 - i];
  }
}

template <typename T>
T get_le(const unsigned char* src) {
  T value;
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(&value, src, sizeof(T));
  } else {
    unsigned char tmp[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) tmp[i] = src[sizeof(T) - 1 - i];
    std::memcpy(&value, tmp, sizeof(T));
  }
  return value;
}

inline void write_all(std::FILE* f, const void* data, std::size_t n, const fs::path& p) {
  if (n != 0 && std::fwrite(data, 1, n, f) != n) throw IoError("write failed: " + p.string());
}

inline void finish(File& f, const fs::path& p) {
  if (std::fflush(f.get()) != 0 || std::ferror(f.get())) throw IoError("write failed: " + p.string());
  std::FILE* raw = f.release();
  if (std::fclose(raw) != 0) throw IoError("close failed: " + p.string());
}

// Shortest round-trip decimal.
inline void append_double(std::string& out, double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw Error("cannot format number");
  out.append(buf, end);
}

inline void append_uint(std::string& out, std::uint64_t v) {
  char buf[24];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, end);
}

inline std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const fs::path& p, const std::string& text) {
  File f = open(p, "wb");
  write_all(f.get(), text.data(), text.size(), p);
  finish(f, p);
}

// Splits "a,b" lines; tolerates a trailing '\r' and a final newline.
class CsvLines {
 public:
  explicit CsvLines(std::string_view text) : text_(text) {}

  // Returns false at end of input.
  bool next(std::string_view& line) {
    if (pos_ >= text_.size()) return false;
    std::size_t nl = text_.find('\n', pos_);
    if (nl == std::string_view::npos) nl = text_.size();
    line = text_.substr(pos_, nl - pos_);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos_ = nl + 1;
    ++line_no_;
    return true;
  }

  std::size_t line_no() const noexcept { return line_no_; }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_no_ = 0;
};

template <typename Int>
Int parse_uint(std::string_view s, std::size_t line, const char* what) {
  Int v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    throw ParseError(line, std::string("invalid ") + what + " '" + std::string(s) + "'");
  }
  return v;
}

inline double parse_double(std::string_view s, std::size_t line, const char* what) {
  double v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    throw ParseError(line, std::string("invalid ") + what + " '" + std::string(s) + "'");
  }
  return v;
}

inline std::pair<std::string_view, std::string_view> split_pair(std::string_view line,
                                                                std::size_t line_no) {
  const std::size_t comma = line.find(',');
  if (comma == std::string_view::npos || line.find(',', comma + 1) != std::string_view::npos) {
    throw ParseError(line_no, "expected two comma-separated fields, got '" + std::string(line) + "'");
  }
  return {line.substr(0, comma), line.substr(comma + 1)};
}

inline void expect_header(CsvLines& lines, std::string_view header) {
  std::string_view line;
  if (!lines.next(line)) throw ParseError(1, "empty file, expected header '" + std::string(header) + "'");
  if (line != header) {
    throw ParseError(lines.line_no(), "expected header '" + std::string(header) + "', got '" +
                                          std::string(line) + "'");
  }
}

}  // namespace detail

// ---------------------------------------------------------------- YET

inline void write_yet(const fs::path& path, const YearEventTable& yet, std::uint64_t seed = 0) {
  detail::File f = detail::open(path, "wb");
  unsigned char header[kYetHeaderBytes];
  std::memcpy(header, kYetMagic.data(), 4);
  detail::put_le<std::uint64_t>(header + 4, yet.trial_count());
  detail::put_le<std::uint32_t>(header + 12, yet.events_per_trial());
  detail::put_le<std::uint64_t>(header + 16, seed);
  detail::write_all(f.get(), header, sizeof header, path);

  constexpr std::size_t kBlock = 1 << 16;
  std::vector<unsigned char> buf(kBlock * kYetRecordBytes);
  const auto ids = yet.event_ids();
  const auto ts = yet.timestamps();
  for (std::size_t i = 0; i < ids.size(); i += kBlock) {
    const std::size_t n = std::min(kBlock, ids.size() - i);
    for (std::size_t k = 0; k < n; ++k) {
      unsigned char* rec = buf.data() + k * kYetRecordBytes;
      detail::put_le<std::uint32_t>(rec, ids[i + k].value);
      detail::put_le<double>(rec + 4, ts[i + k]);
    }
    detail::write_all(f.get(), buf.data(), n * kYetRecordBytes, path);
  }
  detail::finish(f, path);
}

inline YetFileHeader read_yet_header(const fs::path& path) {
  std::error_code ec;
  const std::uintmax_t size = fs::file_size(path, ec);
  if (ec) throw IoError("cannot stat " + path.string() + ": " + ec.message());
  detail::File f = detail::open(path, "rb");
  unsigned char header[kYetHeaderBytes];
  const std::size_t got = std::fread(header, 1, sizeof header, f.get());
  if (got >= 4 && std::memcmp(header, kYetMagic.data(), 4) != 0) {
    throw FormatError(FormatError::Kind::bad_magic, path.string() + ": bad magic, not a YET1 file");
  }
  if (got < sizeof header) {
    throw FormatError(FormatError::Kind::truncated, path.string() + ": truncated header");
  }
  YetFileHeader h;
  h.trial_count = detail::get_le<std::uint64_t>(header + 4);
  h.events_per_trial = detail::get_le<std::uint32_t>(header + 12);
  h.seed = detail::get_le<std::uint64_t>(header + 16);

  if (h.events_per_trial != 0 &&
      h.trial_count > (std::numeric_limits<std::uintmax_t>::max() - kYetHeaderBytes) /
                          kYetRecordBytes / h.events_per_trial) {
    throw FormatError(FormatError::Kind::count_mismatch, path.string() + ": header counts overflow");
  }
  const std::uintmax_t expected = yet_file_size(h.trial_count, h.events_per_trial);
  if (size < expected) {
    throw FormatError(FormatError::Kind::truncated,
                      path.string() + ": truncated, " + std::to_string(size) + " bytes of " +
                          std::to_string(expected));
  }
  if (size > expected) {
    throw FormatError(FormatError::Kind::count_mismatch,
                      path.string() + ": " + std::to_string(size) +
                          " bytes but header counts imply " + std::to_string(expected));
  }
  return h;
}

inline YearEventTable read_yet(const fs::path& path, YetFileHeader* header_out = nullptr) {
  const YetFileHeader h = read_yet_header(path);
  if (h.trial_count > std::numeric_limits<std::uint32_t>::max()) {
    throw FormatError(FormatError::Kind::count_mismatch,
                      path.string() + ": trial count exceeds 32-bit trial ids");
  }
  detail::File f = detail::open(path, "rb");
  if (std::fseek(f.get(), static_cast<long>(kYetHeaderBytes), SEEK_SET) != 0) {
    throw IoError("seek failed: " + path.string());
  }
  const std::size_t slots = h.trial_count * h.events_per_trial;
  std::vector<EventId> ids(slots);
  std::vector<double> ts(slots);

  constexpr std::size_t kBlock = 1 << 16;
  std::vector<unsigned char> buf(kBlock * kYetRecordBytes);
  for (std::size_t i = 0; i < slots; i += kBlock) {
    const std::size_t n = std::min(kBlock, slots - i);
    if (std::fread(buf.data(), kYetRecordBytes, n, f.get()) != n) {
      throw FormatError(FormatError::Kind::truncated, path.string() + ": truncated body");
    }
    for (std::size_t k = 0; k < n; ++k) {
      const unsigned char* rec = buf.data() + k * kYetRecordBytes;
      ids[i + k] = EventId(detail::get_le<std::uint32_t>(rec));
      ts[i + k] = detail::get_le<double>(rec + 4);
    }
  }
  if (header_out) *header_out = h;
  try {
    return YearEventTable(h.trial_count, h.events_per_trial, std::move(ids), std::move(ts));
  } catch (const ValidationError& e) {
    throw FormatError(FormatError::Kind::invalid_content, path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------- ELT

inline std::string format_elt(const EventLossTable& elt) {
  std::string out = "event_id,loss\n";
  out.reserve(out.size() + elt.size() * 24);
  for (const EltRecord& r : elt.records()) {
    detail::append_uint(out, r.event.value);
    out.push_back(',');
    detail::append_double(out, r.loss);
    out.push_back('\n');
  }
  return out;
}

inline EventLossTable parse_elt(std::string_view text, std::uint32_t elt_id) {
  detail::CsvLines lines(text);
  detail::expect_header(lines, "event_id,loss");
  std::vector<EltRecord> records;
  std::string_view line;
  while (lines.next(line)) {
    const std::size_t n = lines.line_no();
    if (line.empty()) throw ParseError(n, "empty line");
    auto [id_s, loss_s] = detail::split_pair(line, n);
    const auto id = detail::parse_uint<std::uint32_t>(id_s, n, "event id");
    const double loss = detail::parse_double(loss_s, n, "loss");
    if (id == 0) throw ParseError(n, "event id 0 is reserved");
    if (!(loss >= 0.0) || !std::isfinite(loss)) throw ParseError(n, "loss must be finite and >= 0");
    if (!records.empty() && records.back().event.value >= id) {
      throw ParseError(n, "event ids must be strictly ascending");
    }
    records.push_back({EventId(id), loss});
  }
  return EventLossTable(elt_id, std::move(records));
}

inline void write_elt(const fs::path& path, const EventLossTable& elt) {
  detail::write_text(path, format_elt(elt));
}

inline EventLossTable read_elt(const fs::path& path, std::uint32_t elt_id) {
  return parse_elt(detail::read_text(path), elt_id);
}

inline fs::path elt_file_name(std::uint32_t elt_id) {
  return "elt_" + std::to_string(elt_id) + ".csv";
}

inline void write_elt_pool(const fs::path& dir, const EltPool& pool) {
  fs::create_directories(dir);
  for (const auto& [id, elt] : pool) write_elt(dir / elt_file_name(id), elt);
}

// Loads every elt_<id>.csv in `dir`.
inline EltPool read_elt_pool(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("ELT directory " + dir.string() + " not found");
  EltPool pool;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (!name.starts_with("elt_") || !name.ends_with(".csv")) continue;
    const std::string_view digits = std::string_view(name).substr(4, name.size() - 8);
    std::uint32_t id = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), id);
    if (ec != std::errc{} || ptr != digits.data() + digits.size()) continue;
    pool.emplace(id, read_elt(entry.path(), id));
  }
  return pool;
}

// ---------------------------------------------------------------- LLT / YLT

inline std::string format_loss_table(const TrialLossTable& table) {
  std::string out = "trial_id,loss\n";
  out.reserve(out.size() + table.size() * 24);
  for (std::size_t i = 0; i < table.size(); ++i) {
    detail::append_uint(out, i + 1);
    out.push_back(',');
    detail::append_double(out, table.losses[i]);
    out.push_back('\n');
  }
  return out;
}

inline TrialLossTable parse_loss_table(std::string_view text, LossRole role,
                                       std::optional<std::uint32_t> owner = std::nullopt) {
  detail::CsvLines lines(text);
  detail::expect_header(lines, "trial_id,loss");
  TrialLossTable table{role, owner, {}};
  std::string_view line;
  while (lines.next(line)) {
    const std::size_t n = lines.line_no();
    if (line.empty()) throw ParseError(n, "empty line");
    auto [id_s, loss_s] = detail::split_pair(line, n);
    const auto id = detail::parse_uint<std::uint32_t>(id_s, n, "trial id");
    const double loss = detail::parse_double(loss_s, n, "loss");
    const std::size_t expected = table.losses.size() + 1;
    if (id + std::size_t{1} == expected) throw ParseError(n, "duplicate trial id " + std::to_string(id));
    if (id < expected) throw ParseError(n, "trial id " + std::to_string(id) + " out of order");
    if (id != expected) {
      throw ParseError(n, "trial ids must be dense from 1; expected " + std::to_string(expected) +
                              ", got " + std::to_string(id));
    }
    if (!(loss >= 0.0)) throw ParseError(n, "loss must be >= 0");
    table.losses.push_back(loss);
  }
  return table;
}

inline void write_loss_table(const fs::path& path, const TrialLossTable& table) {
  detail::write_text(path, format_loss_table(table));
}

inline void write_llt(const fs::path& path, const TrialLossTable& llt) { write_loss_table(path, llt); }
inline void write_ylt(const fs::path& path, const TrialLossTable& ylt) { write_loss_table(path, ylt); }

inline TrialLossTable read_llt(const fs::path& path, std::optional<std::uint32_t> layer_id = {}) {
  return parse_loss_table(detail::read_text(path), LossRole::layer, layer_id);
}

inline TrialLossTable read_ylt(const fs::path& path) {
  return parse_loss_table(detail::read_text(path), LossRole::portfolio);
}

// ---------------------------------------------------------------- portfolio

inline constexpr const char* kPortfolioFormat = "aggrisk-portfolio-1";

namespace detail {

inline nlohmann::json amount_to_json(double v) {
  if (std::isinf(v) && v > 0) return "inf";
  return v;
}

inline const nlohmann::json& field(const nlohmann::json& obj, const char* name,
                                   const std::string& where) {
  if (!obj.is_object()) throw FormatError(FormatError::Kind::invalid_content, where + " is not an object");
  auto it = obj.find(name);
  if (it == obj.end()) throw MissingFieldError(where.empty() ? name : where + "." + name);
  return *it;
}

inline double amount_from_json(const nlohmann::json& j, const std::string& where) {
  if (j.is_string()) {
    if (j.get<std::string>() == "inf") return kUnlimited;
    throw FormatError(FormatError::Kind::invalid_content, where + " must be a number or \"inf\"");
  }
  if (!j.is_number()) throw FormatError(FormatError::Kind::invalid_content, where + " must be a number");
  return j.get<double>();
}

template <typename T>
T number_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_number()) throw FormatError(FormatError::Kind::invalid_content, where + " must be a number");
  if constexpr (std::is_integral_v<T>) {
    if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0)) {
      throw FormatError(FormatError::Kind::invalid_content, where + " must be a non-negative integer");
    }
  }
  return j.get<T>();
}

}  // namespace detail

inline nlohmann::json portfolio_to_json(const Portfolio& pf) {
  nlohmann::json programs = nlohmann::json::array();
  for (const Program& p : pf.programs) {
    nlohmann::json layers = nlohmann::json::array();
    for (const Layer& l : p.layers) {
      layers.push_back({
          {"layer_id", l.layer_id},
          {"covered_elts", l.covered_elts},
          {"participations", l.participations},
          {"terms",
           {{"occ_retention", detail::amount_to_json(l.terms.occ_retention)},
            {"occ_limit", detail::amount_to_json(l.terms.occ_limit)},
            {"agg_retention", detail::amount_to_json(l.terms.agg_retention)},
            {"agg_limit", detail::amount_to_json(l.terms.agg_limit)}}},
      });
    }
    programs.push_back({{"program_id", p.program_id}, {"layers", std::move(layers)}});
  }
  return {{"format", kPortfolioFormat}, {"programs", std::move(programs)}};
}

// Builds the portfolio structure and attaches `pool`. Throws
// MissingFieldError, FormatError, or ReferentialError for a layer citing an
// ELT the pool lacks.
inline Portfolio portfolio_from_json(const nlohmann::json& doc, EltPool pool) {
  if (auto it = doc.find("format"); it != doc.end() && *it != kPortfolioFormat) {
    throw FormatError(FormatError::Kind::invalid_content, "unsupported portfolio format");
  }
  Portfolio pf;
  const nlohmann::json& programs = detail::field(doc, "programs", "");
  if (!programs.is_array()) throw FormatError(FormatError::Kind::invalid_content, "programs must be an array");
  for (std::size_t pi = 0; pi < programs.size(); ++pi) {
    const std::string pw = "programs[" + std::to_string(pi) + "]";
    const nlohmann::json& pj = programs[pi];
    Program program;
    program.program_id =
        detail::number_from_json<std::uint32_t>(detail::field(pj, "program_id", pw), pw + ".program_id");
    const nlohmann::json& layers = detail::field(pj, "layers", pw);
    if (!layers.is_array()) throw FormatError(FormatError::Kind::invalid_content, pw + ".layers must be an array");
    for (std::size_t li = 0; li < layers.size(); ++li) {
      const std::string lw = pw + ".layers[" + std::to_string(li) + "]";
      const nlohmann::json& lj = layers[li];
      Layer layer;
      layer.layer_id =
          detail::number_from_json<std::uint32_t>(detail::field(lj, "layer_id", lw), lw + ".layer_id");
      const nlohmann::json& covered = detail::field(lj, "covered_elts", lw);
      const nlohmann::json& parts = detail::field(lj, "participations", lw);
      if (!covered.is_array() || !parts.is_array()) {
        throw FormatError(FormatError::Kind::invalid_content, lw + " ELT lists must be arrays");
      }
      for (const auto& c : covered) {
        layer.covered_elts.push_back(detail::number_from_json<std::uint32_t>(c, lw + ".covered_elts"));
      }
      for (const auto& f : parts) {
        layer.participations.push_back(detail::number_from_json<double>(f, lw + ".participations"));
      }
      const nlohmann::json& terms = detail::field(lj, "terms", lw);
      const std::string tw = lw + ".terms";
      layer.terms.occ_retention = detail::amount_from_json(detail::field(terms, "occ_retention", tw), tw);
      layer.terms.occ_limit = detail::amount_from_json(detail::field(terms, "occ_limit", tw), tw);
      layer.terms.agg_retention = detail::amount_from_json(detail::field(terms, "agg_retention", tw), tw);
      layer.terms.agg_limit = detail::amount_from_json(detail::field(terms, "agg_limit", tw), tw);
      for (std::uint32_t id : layer.covered_elts) {
        if (!pool.contains(id)) {
          throw ReferentialError("layer " + std::to_string(layer.layer_id) +
                                 " references unknown ELT " + std::to_string(id));
        }
      }
      program.layers.push_back(std::move(layer));
    }
    pf.programs.push_back(std::move(program));
  }
  pf.elt_pool = std::move(pool);
  return pf;
}

inline void write_portfolio(const fs::path& path, const Portfolio& pf) {
  detail::write_text(path, portfolio_to_json(pf).dump(2) + "\n");
}

inline Portfolio read_portfolio(const fs::path& path, EltPool pool) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(detail::read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(FormatError::Kind::invalid_content, path.string() + ": " + e.what());
  }
  return portfolio_from_json(doc, std::move(pool));
}

// ---------------------------------------------------------------- data directory

// Standard layout written by `aggrisk gen` and read by the other commands.
struct DataDir {
  fs::path root;

  fs::path yet() const { return root / "yet.bin"; }
  fs::path portfolio() const { return root / "portfolio.json"; }
  fs::path elts() const { return root / "elts"; }
  fs::path config() const { return root / "config.json"; }
};

struct Dataset {
  YearEventTable yet;
  Portfolio portfolio;
  std::uint64_t seed = 0;
};

inline Dataset load_dataset(const DataDir& dir) {
  Dataset ds;
  YetFileHeader header;
  ds.yet = read_yet(dir.yet(), &header);
  ds.seed = header.seed;
  ds.portfolio = read_portfolio(dir.portfolio(), read_elt_pool(dir.elts()));
  return ds;
}

inline void save_dataset(const DataDir& dir, const YearEventTable& yet, const Portfolio& pf,
                         std::uint64_t seed) {
  fs::create_directories(dir.root);
  write_yet(dir.yet(), yet, seed);
  write_elt_pool(dir.elts(), pf.elt_pool);
  write_portfolio(dir.portfolio(), pf);
}

}  // namespace aggrisk::io
