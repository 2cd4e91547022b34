#pragma once

#include "easel/error.hpp"
#include "easel/util.hpp"

#include <doctest.h>

#include <filesystem>
#include <random>
#include <string>

namespace easel::test {

inline std::filesystem::path data_dir() { return EASEL_TEST_DATA; }
inline std::filesystem::path fixture(const std::string& name) { return data_dir() / "fixtures" / name; }
inline std::filesystem::path golden(const std::string& name) { return data_dir() / "golden" / name; }
inline std::filesystem::path assets() { return EASEL_TEST_ASSETS; }

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("easel-test-" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

} // namespace easel::test

// Checks that `expr` throws easel::Error carrying `expected_code`.
#define CHECK_ERROR_CODE(expr, expected_code)                                  \
    do {                                                                       \
        bool easel_thrown_ = false;                                            \
        try {                                                                  \
            (void)(expr);                                                      \
        } catch (const ::easel::Error& easel_e_) {                             \
            easel_thrown_ = true;                                              \
            CHECK_MESSAGE(easel_e_.code() == (expected_code), easel_e_.what()); \
        }                                                                      \
        CHECK_MESSAGE(easel_thrown_, "expected easel::Error from " #expr);     \
    } while (0)
