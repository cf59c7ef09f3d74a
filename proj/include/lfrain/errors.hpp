#pragma once

#include <stdexcept>
#include <string>

namespace lfrain {

// Error taxonomy shared by every module. The CLI maps these onto exit codes:
// numeric/domain failures exit with 2, everything else with 1.

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class BoundsError : public Error {
public:
    using Error::Error;
};

class ContractError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

} // namespace lfrain
