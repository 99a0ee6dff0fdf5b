#pragma once

#include <stdexcept>
#include <string>

namespace dermflow {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (bad dimensions, out-of-range values).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Segmentation or feature extraction found nothing to measure.
class NoLesionError : public Error {
public:
    explicit NoLesionError(const std::string& what = "no lesion found") : Error(what) {}
};

/// Otsu thresholding on an image with a single intensity level.
class DegenerateHistogram : public Error {
public:
    DegenerateHistogram() : Error("degenerate histogram") {}
};

/// GrabCut called with an init mask lacking either foreground or background.
class UninitializedTrimap : public Error {
public:
    UninitializedTrimap() : Error("uninitialized trimap") {}
};

/// Mask too small or collinear for second-moment axes.
class DegenerateMask : public Error {
public:
    explicit DegenerateMask(const std::string& what = "degenerate mask") : Error(what) {}
};

/// Image bytes that are neither PNG nor JPEG, or fail to decode.
class UnsupportedFormat : public Error {
public:
    using Error::Error;
};

/// A model response with no recognizable section headings.
class UnstructuredResponse : public Error {
public:
    UnstructuredResponse() : Error("unstructured response") {}
};

/// A model provider call failed. `retryable` separates transient faults from contract errors.
class ProviderError : public Error {
public:
    explicit ProviderError(const std::string& what, bool retryable = true) : Error(what), retryable_(retryable) {}
    bool retryable() const noexcept { return retryable_; }

private:
    bool retryable_;
};

class ProviderTimeout : public ProviderError {
public:
    explicit ProviderTimeout(const std::string& what = "provider timed out") : ProviderError(what, true) {}
};

/// A workflow stage was invoked from a state that does not allow it.
class IllegalTransition : public Error {
public:
    using Error::Error;
};

/// A workflow stage failed and the case moved to Failed; what() is the recorded reason.
class WorkflowFailed : public Error {
public:
    using Error::Error;
};

}  // namespace dermflow
