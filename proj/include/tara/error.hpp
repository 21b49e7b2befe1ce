#pragma once

#include <stdexcept>
#include <string>

namespace tara {

/// Base for every failure raised by the pipeline.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class EmptyCloud : public Error {
public:
    EmptyCloud() : Error("point cloud is empty") {}
};

class DegenerateCloud : public Error {
public:
    DegenerateCloud() : Error("point cloud has zero spatial extent") {}
};

class UnsortedStream : public Error {
public:
    using Error::Error;
};

class ShapeMismatch : public Error {
public:
    using Error::Error;
};

class LabelOutOfRange : public Error {
public:
    using Error::Error;
};

class ClassMissing : public Error {
public:
    using Error::Error;
};

class EmptyPool : public Error {
public:
    EmptyPool() : Error("pseudo-label pool is empty") {}
};

class InfeasibleConfig : public Error {
public:
    using Error::Error;
};

/// Malformed input files (clouds, manifests, logs, checkpoints, configs).
class FormatError : public Error {
public:
    using Error::Error;
};

}  // namespace tara
