#ifndef SWT_ERROR_HPP
#define SWT_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace swt {

// Base for everything the library throws on purpose.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad input: malformed text, violated precondition, unknown key or id.
class input_error : public error {
public:
    using error::error;
};

// Text that does not parse. `offset` is the byte offset of the offending token.
class parse_error : public input_error {
public:
    parse_error(const std::string& what, std::size_t offset)
        : input_error(what + " at offset " + std::to_string(offset)), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

// The computation itself went wrong: non-finite values, failed realness
// check, empty ensemble, linear-solve breakdown.
class numeric_error : public error {
public:
    using error::error;
};

} // namespace swt

#endif
