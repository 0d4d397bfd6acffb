#pragma once

#include <stdexcept>
#include <string>

namespace dualsr {

// Every precondition failure in the library surfaces as this type so the CLI
// can print a one-line diagnostic.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool ok, const std::string& message)
{
    if (!ok) throw Error(message);
}

} // namespace dualsr
