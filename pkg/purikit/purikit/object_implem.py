"""
Copyright (C) 2026 The purikit authors. All rights reserved. This code is subject to the terms
 and conditions of the MIT License.
"""


class Object(object):
    def __str__(self):
        return "Object"

    def __repr__(self):
        return f"{type(self).__name__}@{id(self)}: {self.__str__()}"
