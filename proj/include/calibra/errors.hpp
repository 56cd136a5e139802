#pragma once

#include <stdexcept>
#include <string>

namespace calibra {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OutOfDomain : Error {
  using Error::Error;
};

struct ShapeMismatch : Error {
  using Error::Error;
};

struct NonPhysicalState : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct InvalidControlPoints : Error {
  using Error::Error;
};

struct InversionError : Error {
  using Error::Error;
};

struct TrainingDiverged : Error {
  using Error::Error;
};

// Carries the pipeline stage so the CLI can map it to an exit code.
enum class Stage { Config, Fom, Calibration, Reduction, Online };

struct StageError : Error {
  StageError(Stage s, const std::string& what) : Error(what), stage(s) {}
  Stage stage;
};

}  // namespace calibra
