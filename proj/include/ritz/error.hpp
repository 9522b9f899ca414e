#ifndef RITZ_ERROR_HPP
#define RITZ_ERROR_HPP

#include <stdexcept>
#include <string>

namespace ritz {

/// Invalid or mutually inconsistent configuration (shapes, keys, ranges).
class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// A loss term or update produced a non-finite value.
class DivergedError : public std::runtime_error {
public:
    explicit DivergedError(std::string term)
        : std::runtime_error("non-finite value in " + term), term_(std::move(term)) {}

    const std::string& term() const noexcept { return term_; }

private:
    std::string term_;
};

inline void require(bool cond, const std::string& msg)
{
    if (!cond) throw ConfigError(msg);
}

} // namespace ritz

#endif // RITZ_ERROR_HPP
