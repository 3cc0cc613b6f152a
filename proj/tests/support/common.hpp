#pragma once

#include <fpkit/util.hpp>

#include <filesystem>
#include <random>
#include <set>
#include <string>

namespace fpkit::testkit {

inline std::filesystem::path test_dir()
{
    return FPKIT_TEST_DIR;
}

inline std::string fixture(const std::string& name)
{
    return read_file(test_dir() / "fixtures" / name);
}

/// Static features the unpacked canvas-font fixture must produce.
inline const std::set<std::string>& canvas_font_features()
{
    static const std::set<std::string> s = {"ArrayExpression:monospace", "MemberExpression:font", "ForStatement:var",
        "MemberExpression:measureText", "MemberExpression:width", "MemberExpression:length", "MemberExpression:getContext",
        "CallExpression:canvas"};
    return s;
}

/// Fresh directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "fpkit")
    {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / (tag + "-" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

} // namespace fpkit::testkit
