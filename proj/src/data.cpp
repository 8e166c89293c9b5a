#include "tpt/data.hpp"

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "tpt/errors.hpp"

namespace tpt {

namespace {

std::vector<int> parse_id_list(const std::string& s, const std::string& where) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string piece;
  while (std::getline(ss, piece, ',')) {
    require(!piece.empty(), ErrorKind::Data, where, ": empty id in list '", s, "'");
    try {
      std::size_t pos = 0;
      int v = std::stoi(piece, &pos);
      require(pos == piece.size() && v >= 0, ErrorKind::Data, where, ": bad token id '", piece,
              "'");
      out.push_back(v);
    } catch (const TptError&) {
      throw;
    } catch (const std::exception&) {
      fail(ErrorKind::Data, where, ": bad token id '", piece, "'");
    }
  }
  require(!out.empty(), ErrorKind::Data, where, ": empty id list");
  return out;
}

std::string join_ids(const std::vector<int>& ids) {
  std::string s;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(ids[i]);
  }
  return s;
}

void validate_record(const ManifestRecord& r, const std::string& where) {
  require(!r.video.empty(), ErrorKind::Data, where, ": missing video field");
  require(!r.question.empty(), ErrorKind::Data, where, ": missing question field");
  require(r.target >= 0, ErrorKind::Data, where, ": negative target");
  if (r.regime == Regime::MultiChoice) {
    require(r.candidates.size() >= 2, ErrorKind::Data, where, ": multi-choice record has ",
            r.candidates.size(), " candidates (need at least 2)");
    require(r.target < static_cast<int>(r.candidates.size()), ErrorKind::Data, where,
            ": answer index ", r.target, " outside the ", r.candidates.size(), " candidates");
  } else {
    require(r.candidates.empty(), ErrorKind::Data, where,
            ": candidates are only valid for multi-choice records");
  }
}

}  // namespace

void save_manifest(const std::string& path, const std::vector<ManifestRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::Data, "cannot open '", path, "' for writing");
  for (std::size_t i = 0; i < records.size(); ++i) {
    const ManifestRecord& r = records[i];
    validate_record(r, path + " record " + std::to_string(i));
    out << "video=" << r.video << " question=" << join_ids(r.question)
        << " regime=" << to_string(r.regime) << " target=" << r.target;
    if (!r.candidates.empty()) {
      out << " candidates=";
      for (std::size_t k = 0; k < r.candidates.size(); ++k) {
        if (k) out << '|';
        out << join_ids(r.candidates[k]);
      }
    }
    out << '\n';
  }
  require(out.good(), ErrorKind::Data, "write failure on '", path, "'");
}

Manifest load_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::Data, "cannot open manifest '", path, "'");
  Manifest m;
  m.dir = std::filesystem::path(path).parent_path().string();

  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string where = path + ":" + std::to_string(lineno);
    std::stringstream ss(line);
    std::string field;
    ManifestRecord r;
    bool any = false, has_regime = false, has_target = false;
    while (ss >> field) {
      if (field[0] == '#') break;
      any = true;
      std::size_t eq = field.find('=');
      require(eq != std::string::npos && eq > 0, ErrorKind::Data, where, ": expected key=value, got '",
              field, "'");
      std::string key = field.substr(0, eq);
      std::string value = field.substr(eq + 1);
      if (key == "video") {
        r.video = value;
      } else if (key == "question") {
        r.question = parse_id_list(value, where);
      } else if (key == "regime") {
        r.regime = regime_from_string(value);
        has_regime = true;
      } else if (key == "target") {
        try {
          std::size_t pos = 0;
          r.target = std::stoi(value, &pos);
          require(pos == value.size(), ErrorKind::Data, where, ": bad target '", value, "'");
        } catch (const TptError&) {
          throw;
        } catch (const std::exception&) {
          fail(ErrorKind::Data, where, ": bad target '", value, "'");
        }
        has_target = true;
      } else if (key == "candidates") {
        std::stringstream cs(value);
        std::string cand;
        while (std::getline(cs, cand, '|')) r.candidates.push_back(parse_id_list(cand, where));
      } else {
        fail(ErrorKind::Data, where, ": unknown field '", key,
             "' (expected video, question, regime, target, candidates)");
      }
    }
    if (!any) continue;  // blank or comment line
    require(has_regime, ErrorKind::Data, where, ": missing regime field");
    require(has_target, ErrorKind::Data, where, ": missing target field");
    validate_record(r, where);
    std::string resolved = (std::filesystem::path(m.dir) / r.video).string();
    require(std::filesystem::exists(resolved), ErrorKind::Data, where, ": feature file '",
            resolved, "' does not exist");
    m.records.push_back(std::move(r));
  }
  require(!m.records.empty(), ErrorKind::Data, path, ": manifest has no records");
  return m;
}

std::string resolve_video(const Manifest& m, const ManifestRecord& r) {
  return (std::filesystem::path(m.dir) / r.video).string();
}

// ---- metrics ------------------------------------------------------------------

namespace {

constexpr const char* kHeader = "epoch,split,loss,accuracy,mse,lr,seconds";

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    require(pos == s.size(), ErrorKind::Data, where, ": trailing characters in '", s, "'");
    return v;
  } catch (const TptError&) {
    throw;
  } catch (const std::exception&) {
    fail(ErrorKind::Data, where, ": bad number '", s, "'");
  }
}

}  // namespace

MetricsWriter::MetricsWriter(const std::string& path, std::uint64_t seed)
    : out_(path, std::ios::binary), path_(path) {
  require(out_.good(), ErrorKind::Data, "cannot open '", path, "' for writing");
  out_ << "# seed=" << seed << '\n' << kHeader << '\n';
  out_.flush();
}

void MetricsWriter::append(const MetricsRow& row) {
  require(row.split == "train" || row.split == "val", ErrorKind::Usage,
          "metrics: unknown split '", row.split, "'");
  char seconds[32];
  std::snprintf(seconds, sizeof(seconds), "%.3f", row.seconds);
  out_ << row.epoch << ',' << row.split << ',' << format_double(row.loss) << ','
       << format_double(row.accuracy) << ',' << format_double(row.mse) << ','
       << format_double(row.lr) << ',' << seconds << '\n';
  out_.flush();
  require(out_.good(), ErrorKind::Data, "write failure on '", path_, "'");
}

MetricsFile read_metrics(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::Data, "cannot open metrics file '", path, "'");
  MetricsFile file;
  std::string line;
  int lineno = 0;
  bool seen_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::string where = path + ":" + std::to_string(lineno);
    if (line[0] == '#') {
      std::size_t at = line.find("seed=");
      if (at != std::string::npos) {
        file.seed = static_cast<std::uint64_t>(std::strtoull(line.c_str() + at + 5, nullptr, 10));
      }
      continue;
    }
    if (!seen_header) {
      require(line == kHeader, ErrorKind::Data, where, ": expected header '", kHeader, "', got '",
              line, "'");
      seen_header = true;
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string piece;
    while (std::getline(ss, piece, ',')) fields.push_back(piece);
    require(fields.size() == 7, ErrorKind::Data, where, ": expected 7 columns, got ",
            fields.size());
    MetricsRow row;
    row.epoch = static_cast<int>(parse_double(fields[0], where));
    row.split = fields[1];
    row.loss = parse_double(fields[2], where);
    row.accuracy = parse_double(fields[3], where);
    row.mse = parse_double(fields[4], where);
    row.lr = parse_double(fields[5], where);
    row.seconds = parse_double(fields[6], where);
    file.rows.push_back(std::move(row));
  }
  require(seen_header, ErrorKind::Data, path, ": missing metrics header");
  return file;
}

}  // namespace tpt
