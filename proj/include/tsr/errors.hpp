#ifndef TSR_ERRORS_HPP
#define TSR_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace tsr {

// Error taxonomy used across the library. The C API and the CLI map these
// onto process exit codes: config -> 2, data/generation/label -> 3,
// numeric abort -> 4.
struct dimension_error : std::runtime_error {
  explicit dimension_error(const std::string& m) : std::runtime_error(m) {}
};

struct contract_error : std::runtime_error {
  explicit contract_error(const std::string& m) : std::runtime_error(m) {}
};

struct label_error : std::runtime_error {
  explicit label_error(const std::string& m) : std::runtime_error(m) {}
};

struct config_error : std::runtime_error {
  explicit config_error(const std::string& m) : std::runtime_error(m) {}
};

struct data_error : std::runtime_error {
  explicit data_error(const std::string& m) : std::runtime_error(m) {}
};

struct generation_error : std::runtime_error {
  explicit generation_error(const std::string& m) : std::runtime_error(m) {}
};

struct optimizer_error : std::runtime_error {
  explicit optimizer_error(const std::string& m) : std::runtime_error(m) {}
};

struct numeric_error : std::runtime_error {
  explicit numeric_error(const std::string& m) : std::runtime_error(m) {}
};

struct io_error : std::runtime_error {
  explicit io_error(const std::string& m) : std::runtime_error(m) {}
};

struct checkpoint_truncated_error : io_error {
  explicit checkpoint_truncated_error(const std::string& m) : io_error(m) {}
};

struct checkpoint_checksum_error : io_error {
  explicit checkpoint_checksum_error(const std::string& m) : io_error(m) {}
};

struct checkpoint_version_error : io_error {
  explicit checkpoint_version_error(const std::string& m) : io_error(m) {}
};

struct unsupported_task_error : std::runtime_error {
  explicit unsupported_task_error(const std::string& m) : std::runtime_error(m) {}
};

}  // namespace tsr

#endif
