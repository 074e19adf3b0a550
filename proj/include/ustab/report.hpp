#pragma once

#include "ustab/config.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace ustab {

// CSV dialect: comma separated, header row, doubles with 17 significant
// digits, "inf" / "-inf" / "nan" for nonfinite values.
class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}

  CsvWriter& header(const std::vector<std::string>& names);
  CsvWriter& cell(double v);
  CsvWriter& cell(long long v);
  CsvWriter& cell(const std::string& v);
  CsvWriter& end_row();

 private:
  void sep();
  std::ostream& out_;
  bool first_ = true;
};

std::string format_double(double v);

// Hex SHA-1 of "blob <size>\0<content>", as git computes object ids.
std::string git_blob_hash(const std::string& content);

struct RunOutcome {
  int exit_code = 0;
  std::vector<std::string> outputs;
};

// Runs one experiment into out_dir and writes manifest.json.  config_text is
// the raw configuration (hashed into the manifest).
RunOutcome run_experiment(const std::string& config_text, const std::string& config_dir,
                          const Overrides& overrides, const std::string& out_dir);

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitOracleFailed = 4;

// {"error": {"kind", "field", "reason"}}
std::string error_record(const std::string& kind, const std::string& field, const std::string& reason);

}  // namespace ustab
