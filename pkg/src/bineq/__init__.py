"""Binary equivalence checking for JVM class files and jars."""

__version__ = "0.1.0"
