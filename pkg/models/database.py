"""
Database configuration and models
"""

from sqlalchemy import create_engine, Column, Integer, String, Text, DateTime, Float, Boolean
from sqlalchemy.orm import declarative_base, sessionmaker
from datetime import datetime
import os

# Database URL from environment
DATABASE_URL = os.getenv("QNC_DATABASE_URL", "sqlite:///./runs.db")

# Create base class
Base = declarative_base()


def make_engine(url: str = DATABASE_URL):
    return create_engine(url, connect_args={"check_same_thread": False} if "sqlite" in url else {})


def make_session_factory(url: str = DATABASE_URL):
    """Session factory bound to `url`, with the tables created"""
    bound = make_engine(url)
    Base.metadata.create_all(bind=bound)
    return sessionmaker(autocommit=False, autoflush=False, bind=bound)


class RunRecord(Base):
    """One protocol run with its full transcript"""
    __tablename__ = "runs"

    id = Column(Integer, primary_key=True, index=True)
    created_at = Column(DateTime, default=datetime.utcnow)
    network = Column(String(255), nullable=False, index=True)
    field_size = Column(Integer, nullable=False)

    # Selection (T0 names and 1-based permutation, comma separated)
    targets = Column(String(500), nullable=False)
    permutation = Column(String(255), nullable=False)

    # Seeds and input
    seed = Column(Integer, default=0)
    code_seed = Column(Integer, default=0)
    input_spec = Column(Text, default="zero")
    retire_early = Column(Boolean, default=False)

    # Results
    fidelity = Column(Float, nullable=False)
    transmissions = Column(Integer, default=0)
    transcript = Column(Text)  # JSON lines


class ReportRecord(Base):
    """A stored property report from `verify`"""
    __tablename__ = "reports"

    id = Column(Integer, primary_key=True, index=True)
    created_at = Column(DateTime, default=datetime.utcnow)
    property = Column(String(100), nullable=False, index=True)
    instance = Column(String(500), default="")
    cases = Column(Integer, default=0)
    failure_count = Column(Integer, default=0)
    min_fidelity = Column(Float)
    body = Column(Text)  # PropertyReport JSON
