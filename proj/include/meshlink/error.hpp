#ifndef MESHLINK_ERROR_HPP
#define MESHLINK_ERROR_HPP

#include <stdexcept>
#include <string>
#include <utility>

namespace meshlink {

/// Base for every error raised by the library.
class Error : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// Bad input: an unknown name, an out-of-range parameter or a malformed document.
/// `field()` names the offending key when one is known.
class ValidationError : public Error
{
  public:
    explicit ValidationError(const std::string& message, std::string field = {})
        : Error(field.empty() ? message : field + ": " + message),
          m_message(message),
          m_field(std::move(field))
    {
    }

    /// The message without the field prefix.
    const std::string& message() const noexcept { return m_message; }
    const std::string& field() const noexcept { return m_field; }

  private:
    std::string m_message;
    std::string m_field;
};

class IoError : public Error
{
  public:
    using Error::Error;
};

} // namespace meshlink

#endif // MESHLINK_ERROR_HPP
