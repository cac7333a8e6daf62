"""
Copyright (C) 2026 The purikit authors. All rights reserved. This code is subject to the terms
 and conditions of the MIT License.
"""

import sys
import logging
import inspect

from purikit.const import DOUBLE_INFINITY

"""
Collection of misc tools
"""

logger = logging.getLogger(__name__)


class PurikitError(Exception):
    def __init__(self, code, msg, text="", category=None, exitStatus=1):
        super().__init__(f"{code}: {msg}{text}")
        self.code = code
        self.msg = msg
        self.text = text
        self.category = category
        self.exitStatus = exitStatus

    @classmethod
    def fromPair(cls, pair, text=""):
        return cls(pair.code(), pair.msg(), str(text), pair.category(), pair.exitStatus())


class BadBundle(PurikitError):
    pass


def check(condition, pair, text=""):
    if not condition:
        raise PurikitError.fromPair(pair, text)


class LogFunction(object):
    def __init__(self, text, logLevel):
        self.text = text
        self.logLevel = logLevel

    def __call__(self, fn):
        def newFn(*args, **kwargs):
            if logger.isEnabledFor(self.logLevel):
                argNames = inspect.getfullargspec(fn)[0]
                logger.log(
                    self.logLevel,
                    "%s %s %s kw:%s",
                    self.text,
                    fn.__name__,
                    [name for name, _ in zip(argNames, args)],
                    sorted(kwargs),
                )
            return fn(*args, **kwargs)

        newFn.__name__ = fn.__name__
        newFn.__doc__ = fn.__doc__
        newFn.__wrapped__ = fn
        return newFn


def current_fn_name(parent_idx=0):
    # frame 0 is this function
    return sys._getframe(1 + parent_idx).f_code.co_name


def log_(func, params, action):
    if logger.isEnabledFor(logging.INFO):
        if "self" in params:
            params = dict(params)
            del params["self"]
        logger.info("%s %s %s", action, func, params)


def floatMaxString(val: float, digits: int = 4):
    if val is None:
        return ""
    if val == DOUBLE_INFINITY:
        return "inf"
    return f"{val:.{digits}f}"


def listOfValues(cls):
    return list(map(lambda c: c, cls))


def getEnumTypeFromString(cls, stringIn):
    for item in cls:
        if item.value[0] == stringIn:
            return item
    raise ValueError(
        f"unknown {cls.__name__} '{stringIn}', expected one of "
        f"{[item.value[0] for item in listOfValues(cls)]}"
    )

