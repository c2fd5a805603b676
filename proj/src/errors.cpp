#include "elmsim/errors.hpp"

namespace elmsim {

const char* to_string(DataErrorKind kind) {
  switch (kind) {
    case DataErrorKind::kMissingManifest: return "missing manifest";
    case DataErrorKind::kMissingEventFile: return "missing event file";
    case DataErrorKind::kMalformedRow: return "malformed row";
    case DataErrorKind::kNegativeTimestamp: return "negative timestamp";
    case DataErrorKind::kUnsortedTimestamps: return "unsorted timestamps";
    case DataErrorKind::kChannelOutOfRange: return "channel out of range";
    case DataErrorKind::kLabelOutOfRange: return "label out of range";
    case DataErrorKind::kOnsetOutOfRange: return "onset out of range";
    case DataErrorKind::kIo: return "i/o error";
  }
  return "unknown";
}

namespace {
std::string format_data_error(DataErrorKind kind, const std::string& file, int line,
                              const std::string& what) {
  std::string msg = file;
  if (line > 0) msg += ":" + std::to_string(line);
  msg += ": ";
  msg += to_string(kind);
  if (!what.empty()) msg += ": " + what;
  return msg;
}
}  // namespace

DataError::DataError(DataErrorKind kind, std::string file, int line, const std::string& what)
    : Error(format_data_error(kind, file, line, what)),
      kind_(kind),
      file_(std::move(file)),
      line_(line) {}

}  // namespace elmsim
