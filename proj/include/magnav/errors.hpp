#pragma once

#include <stdexcept>
#include <string>

namespace magnav {

// Base class for all library errors. The CLI maps ValidationError to exit
// code 2 and everything else derived from Error to exit code 3.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class SourceTooClose : public Error {
public:
  using Error::Error;
};

class OutOfDomain : public Error {
public:
  using Error::Error;
};

class KindMismatch : public Error {
public:
  using Error::Error;
};

class SingularInnovation : public Error {
public:
  using Error::Error;
};

class DegenerateFit : public Error {
public:
  using Error::Error;
};

class RankDeficient : public Error {
public:
  using Error::Error;
};

class NotConverged : public Error {
public:
  using Error::Error;
};

class SingularGradient : public Error {
public:
  using Error::Error;
};

class AllParticlesDegenerate : public Error {
public:
  using Error::Error;
};

class ValidationError : public Error {
public:
  using Error::Error;
};

class TimestampMismatch : public Error {
public:
  using Error::Error;
};

}  // namespace magnav
